use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// `(N, C*R^2, H, W) -> (N, C, R*H, R*W)` with
/// `out[n, c, R*y+dy, R*x+dx] = in[n, c*R^2 + dy*R + dx, y, x]`.
pub fn pixel_shuffle<T: Element>(x: &Tensor<T>, scale: usize) -> Result<Tensor<T>> {
    let (n, cin, h, w) = x.dims4("pixel_shuffle")?;
    let r2 = scale * scale;
    if scale == 0 || cin % r2 != 0 {
        return Err(Error::ShuffleChannels { channels: cin, scale });
    }
    let c = cin / r2;
    let (oh, ow) = (h * scale, w * scale);
    let mut out = vec![T::zero(); x.numel()];
    let src = x.data();
    for b in 0..n {
        for ch in 0..c {
            for dy in 0..scale {
                for dx in 0..scale {
                    let k = ch * r2 + dy * scale + dx;
                    let plane = &src[((b * cin + k) * h) * w..][..h * w];
                    let base = (b * c + ch) * oh * ow;
                    for y in 0..h {
                        let row = base + (scale * y + dy) * ow + dx;
                        for xi in 0..w {
                            out[row + scale * xi] = plane[y * w + xi];
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[n, c, oh, ow], out)
}

/// Exact inverse permutation of [`pixel_shuffle`]; also its backward pass.
pub fn pixel_unshuffle<T: Element>(x: &Tensor<T>, scale: usize) -> Result<Tensor<T>> {
    let (n, c, oh, ow) = x.dims4("pixel_unshuffle")?;
    if scale == 0 || oh % scale != 0 || ow % scale != 0 {
        return Err(Error::ShuffleChannels { channels: c, scale });
    }
    let (h, w, r2) = (oh / scale, ow / scale, scale * scale);
    let cin = c * r2;
    let mut out = vec![T::zero(); x.numel()];
    let src = x.data();
    for b in 0..n {
        for ch in 0..c {
            let base = (b * c + ch) * oh * ow;
            for dy in 0..scale {
                for dx in 0..scale {
                    let k = ch * r2 + dy * scale + dx;
                    let plane = &mut out[((b * cin + k) * h) * w..][..h * w];
                    for y in 0..h {
                        let row = base + (scale * y + dy) * ow + dx;
                        for xi in 0..w {
                            plane[y * w + xi] = src[row + scale * xi];
                        }
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[n, cin, h, w], out)
}
