use crate::error::Result;
use crate::tensor::{Element, Tensor};

pub fn relu<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| v.max(T::zero()))
}

/// Passes `grad` where `x > 0`; the subgradient at exactly 0 is 0.
pub fn relu_backward<T: Element>(x: &Tensor<T>, grad: &Tensor<T>) -> Result<Tensor<T>> {
    x.zip_map(grad, "relu_backward", |v, g| if v > T::zero() { g } else { T::zero() })
}

pub fn sigmoid<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    // keep saturated results inside the open interval, where the exact value lies
    let lo = T::min_positive_value();
    let hi = T::one() - T::epsilon() / (T::one() + T::one());
    x.map(|v| {
        let s = if v >= T::zero() {
            T::one() / (T::one() + (-v).exp())
        } else {
            let e = v.exp();
            e / (T::one() + e)
        };
        s.max(lo).min(hi)
    })
}

/// Backward of [`sigmoid`] expressed through its output.
pub fn sigmoid_backward<T: Element>(out: &Tensor<T>, grad: &Tensor<T>) -> Result<Tensor<T>> {
    out.zip_map(grad, "sigmoid_backward", |s, g| g * s * (T::one() - s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn relu_clamps_negatives() {
        let x = Tensor::from_vec(&[3], vec![-1.0f32, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let g = Tensor::from_vec(&[3], vec![5.0f32, 5.0, 5.0]).unwrap();
        assert_eq!(relu_backward(&x, &g).unwrap().data(), &[0.0, 0.0, 5.0]);
    }

    #[test]
    fn sigmoid_of_zero_is_half() {
        let x = Tensor::<f64>::zeros(&[2]).unwrap();
        assert_eq!(sigmoid(&x).data(), &[0.5, 0.5]);
    }

    proptest! {
        #[test]
        fn sigmoid_f32_is_strictly_inside_unit_interval(v in proptest::collection::vec(-1e4f32..1e4, 1..40)) {
            let x = Tensor::from_vec(&[v.len()], v).unwrap();
            prop_assert!(sigmoid(&x).data().iter().all(|&s| s > 0.0 && s < 1.0));
        }

        #[test]
        fn relu_is_idempotent(v in proptest::collection::vec(-1e4f32..1e4, 1..40)) {
            let x = Tensor::from_vec(&[v.len()], v).unwrap();
            prop_assert_eq!(relu(&relu(&x)), relu(&x));
        }

        #[test]
        fn sigmoid_is_strictly_inside_unit_interval(v in proptest::collection::vec(-1e4f64..1e4, 1..40)) {
            let x = Tensor::from_vec(&[v.len()], v).unwrap();
            prop_assert!(sigmoid(&x).data().iter().all(|&s| s > 0.0 && s < 1.0));
        }
    }
}
