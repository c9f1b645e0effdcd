//! Dense row-major tensors in `N, C, H, W` order.
//!
//! Everything in the crate is generic over [`Element`] so the same code runs
//! in `f32` for training and inference and in `f64` for gradient checks.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

/// Floating-point scalar usable as tensor storage.
pub trait Element:
    Float + FromPrimitive + ToPrimitive + Sum + Default + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// `c = alpha * op(a) * op(b) + beta * c` on row-major matrices, with
    /// `op(a)` of shape `m x k` and `op(b)` of shape `k x n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        trans_a: bool,
        b: &[Self],
        trans_b: bool,
        beta: Self,
        c: &mut [Self],
    );

    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts to any float")
    }
}

macro_rules! impl_element {
    ($t:ty, $kernel:path) => {
        impl Element for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                trans_a: bool,
                b: &[Self],
                trans_b: bool,
                beta: Self,
                c: &mut [Self],
            ) {
                assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
                // row/col strides of op(a) and op(b) in the row-major buffers
                let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
                let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
                // SAFETY: lengths were checked above and the strides describe
                // in-bounds row-major layouts of the stated dimensions.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_element!(f32, matrixmultiply::sgemm);
impl_element!(f64, matrixmultiply::dgemm);

/// Tensor extents, rank 1 to 4.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > 4 || dims.contains(&0) {
            return Err(Error::InvalidShape(dims.to_vec()));
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&c| c <= isize::MAX as usize);
        if count.is_none() {
            return Err(Error::ShapeOverflow(dims.to_vec()));
        }
        Ok(Self(dims.to_vec()))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn numel(&self) -> usize {
        self.0.iter().product()
    }
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[derive(Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

impl<T: Element> Tensor<T> {
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let data = vec![T::zero(); shape.numel()];
        Ok(Self { shape, data })
    }

    pub fn full(dims: &[usize], value: T) -> Result<Self> {
        let shape = Shape::new(dims)?;
        let data = vec![value; shape.numel()];
        Ok(Self { shape, data })
    }

    pub fn from_vec(dims: &[usize], data: Vec<T>) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if data.len() != shape.numel() {
            return Err(Error::DataLength {
                shape: dims.to_vec(),
                len: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn dims(&self) -> &[usize] {
        self.shape.dims()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// `(N, C, H, W)` of a rank-4 tensor.
    pub fn dims4(&self, op: &'static str) -> Result<(usize, usize, usize, usize)> {
        match *self.dims() {
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(Error::Rank {
                op,
                expected: 4,
                got: self.dims().to_vec(),
            }),
        }
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims2(&self, op: &'static str) -> Result<(usize, usize)> {
        match *self.dims() {
            [r, c] => Ok((r, c)),
            _ => Err(Error::Rank {
                op,
                expected: 2,
                got: self.dims().to_vec(),
            }),
        }
    }

    pub fn reshape(mut self, dims: &[usize]) -> Result<Self> {
        let shape = Shape::new(dims)?;
        if shape.numel() != self.data.len() {
            return Err(Error::DataLength {
                shape: dims.to_vec(),
                len: self.data.len(),
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn ensure_same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                op,
                lhs: self.dims().to_vec(),
                rhs: other.dims().to_vec(),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, op: &'static str, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.ensure_same_shape(other, op)?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, "sub", |a, b| a - b)
    }

    /// In-place `self += other`, used for gradient accumulation.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.ensure_same_shape(other, "add_assign")?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    pub fn scale(&self, factor: T) -> Self {
        self.map(|v| v * factor)
    }

    pub fn fill(&mut self, value: T) {
        self.data.iter_mut().for_each(|v| *v = value);
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.ensure_same_shape(other, "max_abs_diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    /// Convert element type (e.g. an `f32` network into its `f64` shadow).
    pub fn cast<U: Element>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|v| U::from_f64_lossy(v.to_f64().unwrap_or(f64::NAN)))
                .collect(),
        }
    }

    /// Concatenate rank-4 tensors along the channel axis, in argument order.
    pub fn concat_channels(parts: &[&Self]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Config("concat of zero tensors".into()))?;
        let (n, _, h, w) = first.dims4("concat_channels")?;
        let mut channels = 0;
        for p in parts {
            let (pn, pc, ph, pw) = p.dims4("concat_channels")?;
            if (pn, ph, pw) != (n, h, w) {
                return Err(Error::ShapeMismatch {
                    op: "concat_channels",
                    lhs: first.dims().to_vec(),
                    rhs: p.dims().to_vec(),
                });
            }
            channels += pc;
        }
        let plane = h * w;
        let mut data = Vec::with_capacity(n * channels * plane);
        for b in 0..n {
            for p in parts {
                let pc = p.dims()[1];
                data.extend_from_slice(&p.data[b * pc * plane..(b + 1) * pc * plane]);
            }
        }
        Self::from_vec(&[n, channels, h, w], data)
    }

    /// Copy of channels `lo..hi` of a rank-4 tensor.
    pub fn channel_slice(&self, lo: usize, hi: usize) -> Result<Self> {
        let (n, c, h, w) = self.dims4("channel_slice")?;
        if lo >= hi || hi > c {
            return Err(Error::ChannelRange { lo, hi, channels: c });
        }
        let plane = h * w;
        let mut data = Vec::with_capacity(n * (hi - lo) * plane);
        for b in 0..n {
            data.extend_from_slice(&self.data[(b * c + lo) * plane..(b * c + hi) * plane]);
        }
        Self::from_vec(&[n, hi - lo, h, w], data)
    }

    /// Sample `b` of a rank-4 batch as a `(1, C, H, W)` tensor.
    pub fn batch_item(&self, b: usize) -> Result<Self> {
        self.batch_range(b, b + 1)
    }

    /// Samples `lo..hi` of a rank-4 batch.
    pub fn batch_range(&self, lo: usize, hi: usize) -> Result<Self> {
        let (n, c, h, w) = self.dims4("batch_range")?;
        if lo >= hi || hi > n {
            return Err(Error::ShapeMismatch {
                op: "batch_range",
                lhs: self.dims().to_vec(),
                rhs: vec![lo, hi],
            });
        }
        let len = c * h * w;
        Self::from_vec(&[hi - lo, c, h, w], self.data[lo * len..hi * len].to_vec())
    }

    /// Stack equally shaped `(1, C, H, W)` tensors into one batch.
    pub fn stack_batch(items: &[Self]) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::Config("empty batch".into()))?;
        let (_, c, h, w) = first.dims4("stack_batch")?;
        let mut data = Vec::with_capacity(items.len() * c * h * w);
        for it in items {
            first.ensure_same_shape(it, "stack_batch")?;
            data.extend_from_slice(&it.data);
        }
        Self::from_vec(&[items.len(), c, h, w], data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zeros_have_requested_shape_and_are_zero() {
        let t = Tensor::<f32>::zeros(&[1, 1, 2, 2]).unwrap();
        assert_eq!(t.dims(), &[1, 1, 2, 2]);
        assert_eq!(t.data(), &[0.0; 4]);
        let v = Tensor::<f32>::zeros(&[4]).unwrap();
        assert_eq!(v.data(), &[0.0; 4]);
    }

    #[test]
    fn invalid_shapes_are_rejected() {
        assert!(matches!(Tensor::<f32>::zeros(&[]), Err(Error::InvalidShape(_))));
        assert!(matches!(Tensor::<f32>::zeros(&[1, 0]), Err(Error::InvalidShape(_))));
        assert!(matches!(
            Tensor::<f32>::zeros(&[1, 2, 3, 4, 5]),
            Err(Error::InvalidShape(_))
        ));
        assert!(matches!(
            Shape::new(&[usize::MAX, 2]),
            Err(Error::ShapeOverflow(_))
        ));
    }

    #[test]
    fn add_is_elementwise() {
        let a = Tensor::from_vec(&[2], vec![1.0f32, 2.0]).unwrap();
        let b = Tensor::from_vec(&[2], vec![3.0f32, 4.0]).unwrap();
        assert_eq!(a.add(&b).unwrap().data(), &[4.0, 6.0]);
        let z = Tensor::zeros(&[2]).unwrap();
        assert_eq!(a.add(&z).unwrap(), a);
        let c = Tensor::from_vec(&[1, 2], vec![3.0f32, 4.0]).unwrap();
        assert!(matches!(a.add(&c), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn concat_of_three_64_channel_maps_has_192_channels() {
        let p = Tensor::<f32>::zeros(&[1, 64, 8, 8]).unwrap();
        let out = Tensor::concat_channels(&[&p, &p, &p]).unwrap();
        assert_eq!(out.dims(), &[1, 192, 8, 8]);
        assert_eq!(Tensor::concat_channels(&[&p]).unwrap(), p);
    }

    #[test]
    fn concat_rejects_mismatched_spatial_dims() {
        let a = Tensor::<f32>::zeros(&[1, 2, 4, 4]).unwrap();
        let b = Tensor::<f32>::zeros(&[1, 2, 4, 5]).unwrap();
        let c = Tensor::<f32>::zeros(&[2, 2, 4, 4]).unwrap();
        assert!(Tensor::concat_channels(&[&a, &b]).is_err());
        assert!(Tensor::concat_channels(&[&a, &c]).is_err());
    }

    #[test]
    fn channel_slice_bounds_and_shape() {
        let t = Tensor::from_vec(&[1, 3, 2, 2], (0..12).map(|v| v as f32).collect()).unwrap();
        let s = t.channel_slice(1, 2).unwrap();
        assert_eq!(s.dims(), &[1, 1, 2, 2]);
        assert_eq!(s.data(), &[4.0, 5.0, 6.0, 7.0]);
        assert_eq!(t.channel_slice(0, 3).unwrap(), t);
        assert!(matches!(t.channel_slice(2, 2), Err(Error::ChannelRange { .. })));
        assert!(matches!(t.channel_slice(1, 4), Err(Error::ChannelRange { .. })));
    }

    #[test]
    fn gemm_transposes_agree_with_naive_product() {
        let a: Vec<f64> = (0..6).map(|v| v as f64).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|v| v as f64 * 0.5).collect(); // 3x4
        let mut c = vec![0.0; 8];
        f64::gemm(2, 3, 4, &a, false, &b, false, 0.0, &mut c);
        for i in 0..2 {
            for j in 0..4 {
                let want: f64 = (0..3).map(|k| a[i * 3 + k] * b[k * 4 + j]).sum();
                assert_eq!(c[i * 4 + j], want);
            }
        }
        // a^T stored as 3x2, b^T stored as 4x3
        let at: Vec<f64> = (0..6).map(|i| a[(i % 2) * 3 + i / 2]).collect();
        let bt: Vec<f64> = (0..12).map(|i| b[(i % 3) * 4 + i / 3]).collect();
        let mut c2 = vec![0.0; 8];
        f64::gemm(2, 3, 4, &at, true, &bt, true, 0.0, &mut c2);
        assert_eq!(c, c2);
    }

    fn dims4() -> impl Strategy<Value = (usize, usize, usize, usize)> {
        (1usize..3, 1usize..5, 1usize..5, 1usize..5)
    }

    proptest! {
        #[test]
        fn zeros_sum_to_zero((n, c, h, w) in dims4()) {
            prop_assert_eq!(Tensor::<f32>::zeros(&[n, c, h, w]).unwrap().sum(), 0.0);
        }

        #[test]
        fn add_commutes(v in proptest::collection::vec(-1e3f32..1e3, 1..32)) {
            let a = Tensor::from_vec(&[v.len()], v.clone()).unwrap();
            let b = Tensor::from_vec(&[v.len()], v.iter().rev().copied().collect()).unwrap();
            prop_assert_eq!(a.add(&b).unwrap(), b.add(&a).unwrap());
        }

        #[test]
        fn integer_sums_are_exact(v in proptest::collection::vec(-1000i32..1000, 1..64)) {
            let t = Tensor::from_vec(&[v.len()], v.iter().map(|&x| x as f32).collect()).unwrap();
            prop_assert_eq!(t.sum(), v.iter().sum::<i32>() as f32);
        }

        #[test]
        fn concat_then_slice_reconstructs_parts(
            (n, h, w) in (1usize..3, 1usize..5, 1usize..5),
            chans in proptest::collection::vec(1usize..4, 1..4),
            seed in any::<u32>(),
        ) {
            let parts: Vec<Tensor<f32>> = chans
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let len = n * c * h * w;
                    let data = (0..len)
                        .map(|k| ((k as u32).wrapping_mul(2654435761).wrapping_add(seed ^ i as u32) % 1000) as f32 / 7.0)
                        .collect();
                    Tensor::from_vec(&[n, c, h, w], data).unwrap()
                })
                .collect();
            let refs: Vec<&Tensor<f32>> = parts.iter().collect();
            let cat = Tensor::concat_channels(&refs).unwrap();
            let mut lo = 0;
            for p in &parts {
                let hi = lo + p.dims()[1];
                let s = cat.channel_slice(lo, hi).unwrap();
                prop_assert_eq!(
                    s.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                    p.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
                );
                lo = hi;
            }
        }
    }
}
