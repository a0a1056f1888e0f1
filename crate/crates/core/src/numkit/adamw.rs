//! AdamW with decoupled weight decay.
//!
//! The decay is applied to the parameter before the moment update, so it
//! never mixes into the adaptive step:
//!
//! ```text
//! θ ← θ·(1 − lr·wd)
//! m ← β₁m + (1−β₁)g            v ← β₂v + (1−β₂)g²
//! θ ← θ − lr·(m/(1−β₁ᵗ)) / (√(v/(1−β₂ᵗ)) + ε)
//! ```

use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct AdamWParams {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamWParams {
    fn default() -> Self {
        AdamWParams { lr: 1e-3, weight_decay: 0.1, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct AdamWState {
    pub m: Tensor,
    pub v: Tensor,
    pub step: u64,
}

impl AdamWState {
    pub fn new(shape: &[usize]) -> Self {
        AdamWState { m: Tensor::zeros(shape), v: Tensor::zeros(shape), step: 0 }
    }
}

/// One optimizer update in place. A NaN gradient is a hard error.
pub fn adamw_step(
    param: &mut Tensor,
    grad: &Tensor,
    state: &mut AdamWState,
    hp: &AdamWParams,
) -> Result<()> {
    if param.shape != grad.shape || param.shape != state.m.shape {
        return Err(Error::Shape {
            op: "adamw_step",
            detail: format!(
                "param {:?} grad {:?} state {:?}",
                param.shape, grad.shape, state.m.shape
            ),
        });
    }
    if !grad.is_finite() {
        return Err(Error::Numeric("NaN/Inf gradient passed to adamw_step".into()));
    }

    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hp.beta1.powi(t);
    let bc2 = 1.0 - hp.beta2.powi(t);
    let decay = 1.0 - hp.lr * hp.weight_decay;

    for i in 0..param.data.len() {
        let g = grad.data[i];
        param.data[i] *= decay;
        state.m.data[i] = hp.beta1 * state.m.data[i] + (1.0 - hp.beta1) * g;
        state.v.data[i] = hp.beta2 * state.v.data[i] + (1.0 - hp.beta2) * g * g;
        let mhat = state.m.data[i] / bc1;
        let vhat = state.v.data[i] / bc2;
        param.data[i] -= hp.lr * mhat / (vhat.sqrt() + hp.eps);
    }
    Ok(())
}
