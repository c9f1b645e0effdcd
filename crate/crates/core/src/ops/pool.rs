use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Per-channel spatial mean: `(N, C, H, W) -> (N, C)`.
pub fn global_avg_pool<T: Element>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dims4("global_avg_pool")?;
    let plane = h * w;
    let inv = T::one() / T::from_usize(plane).unwrap();
    let data = x
        .data()
        .chunks_exact(plane)
        .map(|ch| ch.iter().copied().sum::<T>() * inv)
        .collect();
    Tensor::from_vec(&[n, c], data)
}

/// Spreads `grad / (H*W)` uniformly over each channel.
pub fn global_avg_pool_backward<T: Element>(grad: &Tensor<T>, height: usize, width: usize) -> Result<Tensor<T>> {
    let (n, c) = grad.dims2("global_avg_pool_backward")?;
    let plane = height * width;
    let inv = T::one() / T::from_usize(plane).unwrap();
    let mut data = Vec::with_capacity(n * c * plane);
    for &g in grad.data() {
        data.extend(std::iter::repeat_n(g * inv, plane));
    }
    Tensor::from_vec(&[n, c, height, width], data)
}

fn check_alpha<T: Element>(x: &Tensor<T>, alpha: &Tensor<T>) -> Result<usize> {
    let (n, c, h, w) = x.dims4("channel_scale")?;
    if alpha.dims() != [n, c] {
        return Err(Error::ShapeMismatch {
            op: "channel_scale",
            lhs: x.dims().to_vec(),
            rhs: alpha.dims().to_vec(),
        });
    }
    Ok(h * w)
}

/// `out[n,c,h,w] = alpha[n,c] * x[n,c,h,w]`.
pub fn channel_scale<T: Element>(x: &Tensor<T>, alpha: &Tensor<T>) -> Result<Tensor<T>> {
    let plane = check_alpha(x, alpha)?;
    let data = x
        .data()
        .chunks_exact(plane)
        .zip(alpha.data())
        .flat_map(|(ch, &a)| ch.iter().map(move |&v| v * a))
        .collect();
    Tensor::from_vec(x.dims(), data)
}

/// Returns `(d_x, d_alpha)`.
pub fn channel_scale_backward<T: Element>(
    x: &Tensor<T>,
    alpha: &Tensor<T>,
    grad: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let plane = check_alpha(x, alpha)?;
    x.ensure_same_shape(grad, "channel_scale_backward")?;
    let dx = channel_scale(grad, alpha)?;
    let da = x
        .data()
        .chunks_exact(plane)
        .zip(grad.data().chunks_exact(plane))
        .map(|(xc, gc)| xc.iter().zip(gc).map(|(&a, &b)| a * b).sum())
        .collect();
    Ok((dx, Tensor::from_vec(alpha.dims(), da)?))
}
