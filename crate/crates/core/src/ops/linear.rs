use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// `out = x * weight^T + bias` for `x: (N, Din)`, `weight: (Dout, Din)`.
pub fn fully_connected<T: Element>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, din) = x.dims2("fully_connected input")?;
    let (dout, wdin) = weight.dims2("fully_connected weight")?;
    if wdin != din || bias.dims() != [dout] {
        return Err(Error::ShapeMismatch {
            op: "fully_connected",
            lhs: x.dims().to_vec(),
            rhs: weight.dims().to_vec(),
        });
    }
    let mut out: Vec<T> = (0..n).flat_map(|_| bias.data().iter().copied()).collect();
    T::gemm(n, din, dout, x.data(), false, weight.data(), true, T::one(), &mut out);
    Tensor::from_vec(&[n, dout], out)
}

#[derive(Clone, Debug)]
pub struct LinearGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn fully_connected_backward<T: Element>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<LinearGrads<T>> {
    let (n, din) = x.dims2("fully_connected_backward input")?;
    let (dout, _) = weight.dims2("fully_connected_backward weight")?;
    if grad_out.dims() != [n, dout] {
        return Err(Error::ShapeMismatch {
            op: "fully_connected_backward",
            lhs: vec![n, dout],
            rhs: grad_out.dims().to_vec(),
        });
    }
    let mut dx = vec![T::zero(); n * din];
    T::gemm(n, dout, din, grad_out.data(), false, weight.data(), false, T::zero(), &mut dx);
    let mut dw = vec![T::zero(); dout * din];
    T::gemm(dout, n, din, grad_out.data(), true, x.data(), false, T::zero(), &mut dw);
    let db = (0..dout)
        .map(|o| (0..n).map(|r| grad_out.data()[r * dout + o]).sum())
        .collect();
    Ok(LinearGrads {
        input: Tensor::from_vec(&[n, din], dx)?,
        weight: Tensor::from_vec(&[dout, din], dw)?,
        bias: Tensor::from_vec(&[dout], db)?,
    })
}
