//! Zero-padded "same" 2-D convolution via im2col + GEMM.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Geometry shared by the forward and backward passes.
#[derive(Clone, Copy, Debug)]
struct ConvGeom {
    batch: usize,
    cin: usize,
    cout: usize,
    height: usize,
    width: usize,
    kh: usize,
    kw: usize,
}

impl ConvGeom {
    fn new<T: Element>(input: &Tensor<T>, weight: &Tensor<T>) -> Result<Self> {
        let (batch, cin, height, width) = input.dims4("conv2d input")?;
        let (cout, wcin, kh, kw) = weight.dims4("conv2d weight")?;
        if kh % 2 == 0 || kw % 2 == 0 {
            return Err(Error::EvenKernel { kh, kw });
        }
        if wcin != cin {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                lhs: input.dims().to_vec(),
                rhs: weight.dims().to_vec(),
            });
        }
        Ok(Self {
            batch,
            cin,
            cout,
            height,
            width,
            kh,
            kw,
        })
    }

    fn taps(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    fn plane(&self) -> usize {
        self.height * self.width
    }

    fn pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1
    }
}

/// Column offsets `(x_lo, x_hi)` of valid output positions for tap `j`.
fn valid_cols(width: usize, j: usize, pw: usize) -> (usize, usize) {
    let lo = pw.saturating_sub(j);
    let hi = (width + pw).saturating_sub(j).min(width);
    (lo, hi.max(lo))
}

/// Unfold one sample `(Cin, H, W)` into a `(Cin*kh*kw, H*W)` matrix.
fn im2col<T: Element>(src: &[T], g: &ConvGeom, cols: &mut [T]) {
    let (h, w, ph, pw) = (g.height, g.width, g.kh / 2, g.kw / 2);
    let plane = g.plane();
    cols.fill(T::zero());
    for c in 0..g.cin {
        let chan = &src[c * plane..(c + 1) * plane];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = &mut cols[((c * g.kh + i) * g.kw + j) * plane..][..plane];
                let (x_lo, x_hi) = valid_cols(w, j, pw);
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y + i;
                    if sy < ph || sy - ph >= h {
                        continue;
                    }
                    let sy = sy - ph;
                    let dst = &mut row[y * w + x_lo..y * w + x_hi];
                    let start = sy * w + x_lo + j - pw;
                    dst.copy_from_slice(&chan[start..start + (x_hi - x_lo)]);
                }
            }
        }
    }
}

/// Fold a `(Cin*kh*kw, H*W)` column gradient back onto `(Cin, H, W)`, accumulating.
fn col2im<T: Element>(cols: &[T], g: &ConvGeom, dst: &mut [T]) {
    let (h, w, ph, pw) = (g.height, g.width, g.kh / 2, g.kw / 2);
    let plane = g.plane();
    for c in 0..g.cin {
        let chan = &mut dst[c * plane..(c + 1) * plane];
        for i in 0..g.kh {
            for j in 0..g.kw {
                let row = &cols[((c * g.kh + i) * g.kw + j) * plane..][..plane];
                let (x_lo, x_hi) = valid_cols(w, j, pw);
                if x_lo >= x_hi {
                    continue;
                }
                for y in 0..h {
                    let sy = y + i;
                    if sy < ph || sy - ph >= h {
                        continue;
                    }
                    let sy = sy - ph;
                    let start = sy * w + x_lo + j - pw;
                    let src = &row[y * w + x_lo..y * w + x_hi];
                    for (d, &s) in chan[start..start + (x_hi - x_lo)].iter_mut().zip(src) {
                        *d = *d + s;
                    }
                }
            }
        }
    }
}

fn check_bias<T: Element>(bias: &Tensor<T>, cout: usize) -> Result<()> {
    if bias.dims() != [cout] {
        return Err(Error::ShapeMismatch {
            op: "conv2d bias",
            lhs: vec![cout],
            rhs: bias.dims().to_vec(),
        });
    }
    Ok(())
}

/// `out[n,o,y,x] = bias[o] + sum_{c,i,j} in[n,c,y+i-ph,x+j-pw] * w[o,c,i,j]`
/// with `ph = (kh-1)/2`, `pw = (kw-1)/2` and zeros outside the input.
pub fn conv2d<T: Element>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let g = ConvGeom::new(input, weight)?;
    check_bias(bias, g.cout)?;
    let plane = g.plane();
    let mut out = vec![T::zero(); g.batch * g.cout * plane];
    let mut cols = if g.pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); g.taps() * plane]
    };
    for n in 0..g.batch {
        let src = &input.data()[n * g.cin * plane..(n + 1) * g.cin * plane];
        let dst = &mut out[n * g.cout * plane..(n + 1) * g.cout * plane];
        for (o, b) in bias.data().iter().enumerate() {
            dst[o * plane..(o + 1) * plane].fill(*b);
        }
        let rhs = if g.pointwise() {
            src
        } else {
            im2col(src, &g, &mut cols);
            &cols
        };
        T::gemm(g.cout, g.taps(), plane, weight.data(), false, rhs, false, T::one(), dst);
    }
    Tensor::from_vec(&[g.batch, g.cout, g.height, g.width], out)
}

/// Gradients of [`conv2d`] with respect to each of its inputs.
#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

pub fn conv2d_backward<T: Element>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let g = ConvGeom::new(input, weight)?;
    let expected = [g.batch, g.cout, g.height, g.width];
    if grad_out.dims() != expected {
        return Err(Error::ShapeMismatch {
            op: "conv2d_backward",
            lhs: expected.to_vec(),
            rhs: grad_out.dims().to_vec(),
        });
    }
    let plane = g.plane();
    let taps = g.taps();
    let mut d_input = vec![T::zero(); g.batch * g.cin * plane];
    let mut d_weight = vec![T::zero(); g.cout * taps];
    let mut d_bias = vec![T::zero(); g.cout];
    let mut cols = vec![T::zero(); taps * plane];
    let mut d_cols = vec![T::zero(); taps * plane];
    for n in 0..g.batch {
        let src = &input.data()[n * g.cin * plane..(n + 1) * g.cin * plane];
        let go = &grad_out.data()[n * g.cout * plane..(n + 1) * g.cout * plane];
        for (o, db) in d_bias.iter_mut().enumerate() {
            *db = *db + go[o * plane..(o + 1) * plane].iter().copied().sum::<T>();
        }
        let dst = &mut d_input[n * g.cin * plane..(n + 1) * g.cin * plane];
        if g.pointwise() {
            T::gemm(g.cout, plane, taps, go, false, src, true, T::one(), &mut d_weight);
            T::gemm(taps, g.cout, plane, weight.data(), true, go, false, T::zero(), dst);
        } else {
            im2col(src, &g, &mut cols);
            T::gemm(g.cout, plane, taps, go, false, &cols, true, T::one(), &mut d_weight);
            T::gemm(taps, g.cout, plane, weight.data(), true, go, false, T::zero(), &mut d_cols);
            col2im(&d_cols, &g, dst);
        }
    }
    Ok(ConvGrads {
        input: Tensor::from_vec(input.dims(), d_input)?,
        weight: Tensor::from_vec(weight.dims(), d_weight)?,
        bias: Tensor::from_vec(&[g.cout], d_bias)?,
    })
}
