//! Huber training loss, Adam and the learning-rate schedule.

use crate::error::{Error, Result};
use crate::model::Network;
use crate::ops::{ParamStore, Tape};
use crate::tensor::{Element, Tensor};

/// Parameters of the weighted Huber loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    /// Residual magnitude where the loss turns from quadratic to linear.
    pub delta: f64,
    /// Global scale of the loss.
    pub weight: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { delta: 0.5, weight: 1.0 }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("huber delta must be > 0, got {}", self.delta)));
        }
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::Config(format!("loss weight must be > 0, got {}", self.weight)));
        }
        Ok(())
    }
}

/// Adam hyperparameters and the epoch schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub halve_after_epochs: usize,
    pub total_epochs: usize,
    pub finetune_lr: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            halve_after_epochs: 50,
            total_epochs: 60,
            finetune_lr: 1e-5,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(self.beta1) || !open_unit(self.beta2) {
            return Err(Error::Config(format!(
                "betas must lie in (0, 1), got {} and {}",
                self.beta1, self.beta2
            )));
        }
        if !(self.lr > 0.0) || !(self.finetune_lr > 0.0) {
            return Err(Error::Config("learning rates must be > 0".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("epsilon must be > 0".into()));
        }
        if self.total_epochs == 0 {
            return Err(Error::Config("total_epochs must be >= 1".into()));
        }
        Ok(())
    }
}

/// Mean weighted Huber loss and its gradient with respect to `pred`.
///
/// Per element `r = pred - gt`; the loss is `weight * r^2 / 2` for
/// `|r| <= delta` and `weight * (delta * |r| - delta^2 / 2)` beyond.
pub fn huber_loss<T: Element>(pred: &Tensor<T>, gt: &Tensor<T>, cfg: &LossConfig) -> Result<(f64, Tensor<T>)> {
    pred.ensure_same_shape(gt, "huber_loss")?;
    let count = pred.numel() as f64;
    let (delta, weight) = (cfg.delta, cfg.weight);
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(pred.numel());
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        let r = p.to_f64().unwrap_or(f64::NAN) - g.to_f64().unwrap_or(f64::NAN);
        total += if r.abs() <= delta {
            weight * r * r / 2.0
        } else {
            weight * (delta * r.abs() - delta * delta / 2.0)
        };
        grad.push(T::from_f64_lossy(weight * r.clamp(-delta, delta) / count));
    }
    Ok((total / count, Tensor::from_vec(pred.dims(), grad)?))
}

/// One bias-corrected Adam update at step `t >= 1`, then all gradients are zeroed.
pub fn adam_step<T: Element>(store: &mut ParamStore<T>, opt: &OptimizerConfig, lr: f64, t: u64) -> Result<()> {
    if t < 1 {
        return Err(Error::StepIndex);
    }
    let (b1, b2, eps) = (opt.beta1, opt.beta2, opt.epsilon);
    let exp = i32::try_from(t).unwrap_or(i32::MAX);
    let c1 = 1.0 - b1.powi(exp);
    let c2 = 1.0 - b2.powi(exp);
    let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
    for p in store.iter_mut() {
        let value = p.value.data_mut();
        let grad = p.grad.data_mut();
        let m = p.adam_m.data_mut();
        let v = p.adam_v.data_mut();
        for i in 0..value.len() {
            let g = f(grad[i]);
            let mi = b1 * f(m[i]) + (1.0 - b1) * g;
            let vi = b2 * f(v[i]) + (1.0 - b2) * g * g;
            let m_hat = mi / c1;
            let v_hat = vi / c2;
            value[i] = T::from_f64_lossy(f(value[i]) - lr * m_hat / (v_hat.sqrt() + eps));
            m[i] = T::from_f64_lossy(mi);
            v[i] = T::from_f64_lossy(vi);
            grad[i] = T::zero();
        }
    }
    Ok(())
}

/// Learning rate for `epoch` (0-based).
pub fn lr_at(epoch: usize, opt: &OptimizerConfig, finetune: bool) -> Result<f64> {
    if epoch >= opt.total_epochs {
        return Err(Error::Epoch {
            epoch,
            total: opt.total_epochs,
        });
    }
    Ok(if finetune {
        opt.finetune_lr
    } else if epoch < opt.halve_after_epochs {
        opt.lr
    } else {
        opt.lr / 2.0
    })
}

/// Samples per forward/backward pass inside [`train_step`]; bounds tape memory.
pub const TRAIN_CHUNK: usize = 4;

/// Forward, Huber loss, backward over the batch and one Adam update.
///
/// `lr_batch` is `(B, 1, p, p)`, `hr_batch` is `(B, 1, R*p, R*p)`. The batch
/// gradient is the mean over samples. Returns the mean loss. A non-finite
/// loss aborts before the parameters are touched.
pub fn train_step<T: Element>(
    net: &mut Network<T>,
    lr_batch: &Tensor<T>,
    hr_batch: &Tensor<T>,
    loss_cfg: &LossConfig,
    opt: &OptimizerConfig,
    lr: f64,
    step: u64,
) -> Result<f64> {
    let (b, _, h, w) = lr_batch.dims4("train_step lr batch")?;
    let r = net.config().scale;
    let (hb, hc, hh, hw) = hr_batch.dims4("train_step hr batch")?;
    if (hb, hc, hh, hw) != (b, 1, r * h, r * w) {
        return Err(Error::ShapeMismatch {
            op: "train_step",
            lhs: vec![b, 1, r * h, r * w],
            rhs: hr_batch.dims().to_vec(),
        });
    }
    net.params.zero_grad();
    let mut tape = Tape::new();
    let mut total = 0.0;
    let mut lo = 0;
    while lo < b {
        let hi = (lo + TRAIN_CHUNK).min(b);
        let share = (hi - lo) as f64 / b as f64;
        tape.clear();
        let out = net.forward_tape(&mut tape, lr_batch.batch_range(lo, hi)?)?;
        let (loss, grad) = huber_loss(tape.get(out), &hr_batch.batch_range(lo, hi)?, loss_cfg)?;
        if !loss.is_finite() {
            net.params.zero_grad();
            return Err(Error::NonFinite(format!("training loss at step {step}")));
        }
        total += share * loss;
        tape.backward(out, grad.scale(T::from_f64_lossy(share)), &mut net.params)?;
        lo = hi;
    }
    adam_step(&mut net.params, opt, lr, step)?;
    Ok(total)
}
