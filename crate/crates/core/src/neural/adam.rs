use super::params::{DBlstmParams, Weights};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one per weight.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Weights,
    pub v: Weights,
    pub step: u64,
}

impl AdamState {
    pub fn new(p: &DBlstmParams) -> Self {
        Self {
            m: Weights::zeros(&p.config),
            v: Weights::zeros(&p.config),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(
    p: &mut DBlstmParams,
    grads: &Weights,
    state: &mut AdamState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    let layout = p.weights.layout();
    if grads.layout() != layout || state.m.layout() != layout || state.v.layout() != layout {
        return Err(Error::ShapeMismatch(
            "gradient or optimizer state does not match parameters".into(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let params = p.weights.tensors_mut();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (((w, g), m), v) in params.into_iter().zip(grads.tensors()).zip(ms).zip(vs) {
        for i in 0..w.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            w[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
