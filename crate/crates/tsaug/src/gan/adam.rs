//! Adam with the gradient-penalty-friendly configuration (beta1 = 0).

use crate::nn::params::{Binder, ParamId, ParamStore};
use crate::tensor::{GradMap, Tape};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.0, beta2: 0.9, eps: 1e-8 }
    }
}

/// One bias-corrected Adam update over a parameter group. `t` is the 1-based
/// update count for this group. Parameters outside the loss graph receive a
/// zero gradient (their moments still decay).
pub fn adam_step(
    store: &mut ParamStore,
    group: &[ParamId],
    binder: &Binder,
    tape: &Tape,
    grads: &GradMap,
    cfg: &AdamConfig,
    t: u64,
) {
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for &pid in group {
        let grad = binder
            .bound_id(pid)
            .and_then(|tid| grads.grad_id(tid))
            .map(|gid| tape.data(gid).to_vec());
        let p = store.get_mut(pid);
        let n = p.data.len();
        let zero = vec![0.0; n];
        let g = grad.as_deref().unwrap_or(&zero);
        for i in 0..n {
            p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g[i];
            p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = p.m[i] / bc1;
            let v_hat = p.v[i] / bc2;
            p.data[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
}
