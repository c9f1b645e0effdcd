use super::ImagePlane;
use crate::error::{Error, Result};

const A: f64 = -0.5;

/// Keys cubic convolution kernel with `a = -0.5`.
pub fn cubic(x: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        (A + 2.0) * x * x * x - (A + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        A * x * x * x - 5.0 * A * x * x + 8.0 * A * x - 4.0 * A
    } else {
        0.0
    }
}

/// Sparse resampling matrix along one axis: `taps` input indices and
/// normalized weights per output sample.
#[derive(Clone, Debug)]
pub struct ResizeWeights {
    pub taps: usize,
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Weights mapping `in_len` samples onto `out_len` samples.
///
/// Downscaling stretches the kernel by the inverse ratio (antialiasing);
/// out-of-range taps are clamped to the nearest edge sample.
pub fn resize_weights(in_len: usize, out_len: usize) -> ResizeWeights {
    let scale = out_len as f64 / in_len as f64;
    let (kernel_scale, width) = if scale < 1.0 { (scale, 4.0 / scale) } else { (1.0, 4.0) };
    let taps = width.ceil() as usize + 2;
    let mut indices = Vec::with_capacity(out_len * taps);
    let mut weights = Vec::with_capacity(out_len * taps);
    for i in 0..out_len {
        let u = (i as f64 + 0.5) / scale - 0.5;
        let left = (u - width / 2.0).floor() as i64;
        let start = weights.len();
        for p in 0..taps as i64 {
            let j = left + p;
            weights.push(kernel_scale * cubic(kernel_scale * (u - j as f64)));
            indices.push(j.clamp(0, in_len as i64 - 1) as usize);
        }
        let sum: f64 = weights[start..].iter().sum();
        for w in &mut weights[start..] {
            *w /= sum;
        }
    }
    ResizeWeights { taps, indices, weights }
}

/// Bicubic resampling to `out_h x out_w`; columns are resampled after rows.
pub fn bicubic_resize(p: &ImagePlane, out_h: usize, out_w: usize) -> Result<ImagePlane> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::Image(format!("cannot resize to {out_h}x{out_w}")));
    }
    let (h, w) = p.dims();
    let src = p.data();
    // height pass: (h, w) -> (out_h, w)
    let rows = resize_weights(h, out_h);
    let mut mid = vec![0.0f64; out_h * w];
    for i in 0..out_h {
        let dst = &mut mid[i * w..(i + 1) * w];
        for t in 0..rows.taps {
            let k = i * rows.taps + t;
            let wt = rows.weights[k];
            if wt == 0.0 {
                continue;
            }
            let line = &src[rows.indices[k] * w..][..w];
            for (d, &s) in dst.iter_mut().zip(line) {
                *d += wt * s as f64;
            }
        }
    }
    // width pass: (out_h, w) -> (out_h, out_w)
    let cols = resize_weights(w, out_w);
    let mut out = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let line = &mid[i * w..(i + 1) * w];
        for j in 0..out_w {
            let base = j * cols.taps;
            let v: f64 = (0..cols.taps)
                .map(|t| cols.weights[base + t] * line[cols.indices[base + t]])
                .sum();
            out.push(v.clamp(0.0, 255.0) as f32);
        }
    }
    ImagePlane::new(out_h, out_w, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kernel_values() {
        assert_eq!(cubic(0.0), 1.0);
        assert_eq!(cubic(1.0), 0.0);
        assert_eq!(cubic(2.0), 0.0);
        assert!((cubic(0.5) - 0.5625).abs() < 1e-12);
        assert!((cubic(1.5) + 0.0625).abs() < 1e-12);
    }

    #[test]
    fn same_size_is_identity() {
        let p = ImagePlane::new(5, 7, (0..35).map(|v| (v * 7 % 255) as f32).collect()).unwrap();
        let q = bicubic_resize(&p, 5, 7).unwrap();
        for (a, b) in p.data().iter().zip(q.data()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn constant_stays_constant() {
        let p = ImagePlane::filled(9, 6, 123.0).unwrap();
        for (h, w) in [(3, 2), (18, 12), (7, 13), (1, 1)] {
            let q = bicubic_resize(&p, h, w).unwrap();
            assert!(q.data().iter().all(|v| (v - 123.0).abs() < 1e-4));
        }
    }

    #[test]
    fn halving_a_ramp_matches_direct_kernel_sums() {
        let p = ImagePlane::new(8, 8, (0..64).map(|i| ((i % 8) * 20 + (i / 8) * 9) as f32).collect()).unwrap();
        let q = bicubic_resize(&p, 4, 4).unwrap();
        // direct 2-D weighted sum with the stretched kernel, edge-clamped
        for oy in 0..4 {
            for ox in 0..4 {
                let (uy, ux) = (2.0 * oy as f64 + 0.5, 2.0 * ox as f64 + 0.5);
                let (mut acc, mut norm_y, mut norm_x) = (0.0, 0.0, 0.0);
                for jy in -6i64..=10 {
                    norm_y += 0.5 * cubic(0.5 * (uy - jy as f64));
                }
                for jx in -6i64..=10 {
                    norm_x += 0.5 * cubic(0.5 * (ux - jx as f64));
                }
                for jy in -6i64..=10 {
                    for jx in -6i64..=10 {
                        let wy = 0.5 * cubic(0.5 * (uy - jy as f64)) / norm_y;
                        let wx = 0.5 * cubic(0.5 * (ux - jx as f64)) / norm_x;
                        acc += wy * wx * p.get(jy.clamp(0, 7) as usize, jx.clamp(0, 7) as usize) as f64;
                    }
                }
                let got = q.get(oy, ox) as f64;
                assert!((got - acc.clamp(0.0, 255.0)).abs() <= 1e-4, "({oy},{ox}) {got} vs {acc}");
            }
        }
    }

    proptest! {
        #[test]
        fn weights_sum_to_one(in_len in 1usize..64, out_len in 1usize..64) {
            let rw = resize_weights(in_len, out_len);
            for row in rw.weights.chunks(rw.taps) {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
            }
            prop_assert!(rw.indices.iter().all(|&i| i < in_len));
        }
    }
}
