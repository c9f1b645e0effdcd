//! Deterministic fixtures shared by the benchmarks.

use oasr_core::Tensor;

/// A tensor filled with a smooth, seed-dependent pattern in roughly [-1, 1].
pub fn pattern(dims: &[usize], seed: u32) -> Tensor<f32> {
    let n: usize = dims.iter().product();
    let phase = seed as f32 * 0.731;
    let data = (0..n).map(|i| (i as f32 * 0.618_034 + phase).sin()).collect();
    Tensor::from_vec(dims, data).expect("fixture dims are valid")
}

/// A Y plane-like image tensor `(1, 1, h, w)` with values in [0, 255].
pub fn image_tensor(h: usize, w: usize, seed: u32) -> Tensor<f32> {
    pattern(&[1, 1, h, w], seed).map(|v| 127.5 + 127.5 * v)
}
