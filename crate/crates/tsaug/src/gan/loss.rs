//! The modified gradient-penalty adversarial losses: realness terms, the
//! interpolated-point gradient penalty (differentiated through a backward
//! pass on the tape), and the weighted label MSE of the asymmetric
//! conditioning scheme.

use crate::gan::critic::CriticWeights;
use crate::gan::generator::GeneratorWeights;
use crate::gan::label::smooth_labels;
use crate::gan::GanError;
use crate::nn::params::{Binder, Fwd, ParamStore};
use crate::tensor::{Result as TensorResult, Tape, TensorError, TensorId};
use crate::window::ConditionLabel;

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub lambda_gp: f64,
    pub lambda_label: f64,
    /// Per-element weights of the label MSE; `None` means uniform 1.
    pub label_weights: Option<Vec<f64>>,
    pub n_critic: usize,
    pub smoothing_eps: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_gp: 10.0,
            lambda_label: 1.0,
            label_weights: None,
            n_critic: 5,
            smoothing_eps: 0.1,
            lr: 1e-4,
            beta1: 0.0,
            beta2: 0.9,
        }
    }
}

impl LossConfig {
    pub fn validate(&self, label_dim: usize) -> Result<(), GanError> {
        let bad = |detail: String| Err(GanError::Config { detail });
        if self.lambda_gp < 0.0 || self.lambda_label < 0.0 {
            return bad("loss weights must be non-negative".into());
        }
        if !(0.0..1.0).contains(&self.smoothing_eps) {
            return bad(format!("smoothing eps {} outside [0,1)", self.smoothing_eps));
        }
        if self.n_critic == 0 {
            return bad("n_critic must be >= 1".into());
        }
        if self.lr <= 0.0 || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("bad optimizer settings lr={} betas=({},{})", self.lr, self.beta1, self.beta2));
        }
        if let Some(w) = &self.label_weights {
            if w.len() != label_dim {
                return bad(format!("{} label weights for dimension {label_dim}", w.len()));
            }
            if w.iter().any(|&x| x < 0.0) {
                return bad("label weights must be non-negative".into());
            }
        }
        Ok(())
    }

    pub fn weights_vec(&self, label_dim: usize) -> Vec<f64> {
        self.label_weights.clone().unwrap_or_else(|| vec![1.0; label_dim])
    }
}

/// `mean over elements of weight * (pred - target)^2` for a `[B, L]` batch.
pub fn weighted_label_mse(
    tape: &mut Tape,
    pred: TensorId,
    target: TensorId,
    weights: &[f64],
) -> TensorResult<TensorId> {
    let shape = tape.shape(pred).to_vec();
    let l = *shape.last().unwrap();
    if weights.len() != l || tape.shape(target) != shape.as_slice() {
        return Err(TensorError::ShapeMismatch {
            op: "weighted_label_mse",
            detail: format!("pred {shape:?}, target {:?}, {} weights", tape.shape(target), weights.len()),
        });
    }
    let diff = tape.sub(pred, target)?;
    let sq = tape.square(diff);
    let w = tape.constant(&[l], weights.to_vec())?;
    let weighted = tape.broadcast_mul(sq, w)?;
    tape.mean_all(weighted)
}

/// Gradient penalty at interpolated points: for each pair,
/// `x_hat = eps * real + (1 - eps) * syn`, and the penalty is
/// `mean_b (||grad_{x_hat} adv(x_hat)||_2 - 1)^2`. The inner gradient is
/// produced by a backward pass whose adjoints live on the tape, so the
/// penalty remains differentiable w.r.t. the critic parameters.
pub fn gradient_penalty<F>(
    tape: &mut Tape,
    real: &[f64],
    syn: &[f64],
    shape: &[usize; 3],
    eps: &[f64],
    adv: F,
) -> Result<TensorId, GanError>
where
    F: FnOnce(&mut Tape, TensorId) -> Result<TensorId, GanError>,
{
    let [b, t, d] = *shape;
    if real.len() != b * t * d || syn.len() != real.len() || eps.len() != b {
        return Err(GanError::Config {
            detail: format!("gradient penalty batch mismatch: {shape:?}", ),
        });
    }
    let mut interp = vec![0.0; b * t * d];
    for bi in 0..b {
        let e = eps[bi];
        for i in 0..t * d {
            let idx = bi * t * d + i;
            interp[idx] = e * real[idx] + (1.0 - e) * syn[idx];
        }
    }
    let x_hat = tape.leaf(&[b, t, d], interp, true)?;
    let scores = adv(tape, x_hat)?;
    if tape.shape(scores) != [b] {
        return Err(GanError::Config {
            detail: format!("adversarial head returned {:?}, expected [{b}]", tape.shape(scores)),
        });
    }
    // Each sample's score depends only on its own row, so the gradient of the
    // sum splits into per-sample gradients.
    let total = tape.sum_all(scores)?;
    let gm = tape.backward(total)?;
    let gx = match gm.grad_id(x_hat) {
        Some(g) => g,
        None => tape.zeros(&[b, t, d])?,
    };
    let sq = tape.square(gx);
    let st = tape.sum_axis(sq, 1)?;
    let sd = tape.sum_axis(st, 2)?;
    let per_sample = tape.reshape(sd, &[b])?;
    let norm = tape.sqrt(per_sample)?;
    let centered = tape.add_scalar(norm, -1.0);
    let pen = tape.square(centered);
    Ok(tape.mean_all(pen)?)
}

/// Numeric values of the loss terms for telemetry.
#[derive(Debug, Clone, Copy, Default)]
pub struct CriticLossParts {
    pub total: f64,
    pub adv_real: f64,
    pub adv_syn: f64,
    pub gradient_penalty: f64,
    pub label_mse: f64,
}

/// One critic batch: real windows with their labels, plus detached synthetic
/// windows of the same shape.
pub struct CriticBatch<'a> {
    pub shape: [usize; 3],
    pub real: &'a [f64],
    pub labels: &'a [ConditionLabel],
    pub syn: &'a [f64],
    /// Per-pair interpolation draws, one per batch element.
    pub eps: &'a [f64],
    pub psa_seed: u64,
}

/// `mean(adv(syn)) - mean(adv(real)) + lambda_gp * penalty +
/// lambda_label * label_mse(label_head(real), smoothed labels)`. The label
/// term uses authentic windows only.
pub fn critic_loss(
    tape: &mut Tape,
    store: &ParamStore,
    critic_binder: &mut Binder,
    critic: &CriticWeights,
    batch: &CriticBatch,
    cfg: &LossConfig,
) -> Result<(TensorId, CriticLossParts), GanError> {
    let [b, t, d] = batch.shape;
    let label_dim = critic.cfg.label_dim;
    if batch.labels.len() != b {
        return Err(GanError::Config { detail: format!("{} labels for batch {b}", batch.labels.len()) });
    }

    let real = tape.leaf(&[b, t, d], batch.real.to_vec(), false)?;
    let syn = tape.leaf(&[b, t, d], batch.syn.to_vec(), false)?;

    let (adv_real, label_pred) = {
        let mut fw = Fwd::new(tape, store, critic_binder);
        critic.forward(&mut fw, real, batch.psa_seed)?
    };
    let adv_syn = {
        let mut fw = Fwd::new(tape, store, critic_binder);
        critic.forward_adv(&mut fw, syn, batch.psa_seed.wrapping_add(1))?
    };

    let mean_real = tape.mean_all(adv_real)?;
    let mean_syn = tape.mean_all(adv_syn)?;
    let wasserstein = tape.sub(mean_syn, mean_real)?;

    let gp_seed = batch.psa_seed.wrapping_add(2);
    let gp = gradient_penalty(tape, batch.real, batch.syn, &batch.shape, batch.eps, |tape, x| {
        let mut fw = Fwd::new(tape, store, critic_binder);
        critic.forward_adv(&mut fw, x, gp_seed)
    })?;

    let mut target = Vec::with_capacity(b * label_dim);
    for l in batch.labels {
        let smoothed = smooth_labels(l, cfg.smoothing_eps);
        let v = smoothed.to_vec();
        if v.len() != label_dim {
            return Err(GanError::LabelDim { want: label_dim, got: v.len() });
        }
        target.extend(v);
    }
    let target = tape.leaf(&[b, label_dim], target, false)?;
    let lmse = weighted_label_mse(tape, label_pred, target, &cfg.weights_vec(label_dim))?;

    let gp_term = tape.scalar_mul(gp, cfg.lambda_gp);
    let label_term = tape.scalar_mul(lmse, cfg.lambda_label);
    let partial = tape.add(wasserstein, gp_term)?;
    let total = tape.add(partial, label_term)?;

    let parts = CriticLossParts {
        total: tape.data(total)[0],
        adv_real: tape.data(mean_real)[0],
        adv_syn: tape.data(mean_syn)[0],
        gradient_penalty: tape.data(gp)[0],
        label_mse: tape.data(lmse)[0],
    };
    Ok((total, parts))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GeneratorLossParts {
    pub total: f64,
    pub adv_syn: f64,
    pub label_mse: f64,
}

/// `-mean(adv(G(z, y))) + lambda_label * label_mse(label_head(G(z, y)),
/// smoothed y)`: the generator is pushed toward high realness and toward
/// reproducing its own conditioning label.
#[allow(clippy::too_many_arguments)]
pub fn generator_loss(
    tape: &mut Tape,
    store: &ParamStore,
    gen_binder: &mut Binder,
    critic_binder: &mut Binder,
    gen: &GeneratorWeights,
    critic: &CriticWeights,
    noise: &[f64],
    labels: &[ConditionLabel],
    cfg: &LossConfig,
    psa_seed: u64,
) -> Result<(TensorId, GeneratorLossParts), GanError> {
    let b = labels.len();
    let label_dim = gen.cfg.label_dim;
    if noise.len() != b * gen.cfg.noise_dim {
        return Err(GanError::Config { detail: format!("noise length {} for batch {b}", noise.len()) });
    }
    let mut label_data = Vec::with_capacity(b * label_dim);
    for l in labels {
        let v = l.to_vec();
        if v.len() != label_dim {
            return Err(GanError::LabelDim { want: label_dim, got: v.len() });
        }
        label_data.extend(v);
    }

    let noise_t = tape.leaf(&[b, gen.cfg.noise_dim], noise.to_vec(), false)?;
    let label_t = tape.leaf(&[b, label_dim], label_data, false)?;

    let synth = {
        let mut fw = Fwd::new(tape, store, gen_binder);
        gen.forward(&mut fw, noise_t, label_t)?
    };
    let (adv, label_pred) = {
        let mut fw = Fwd::new(tape, store, critic_binder);
        critic.forward(&mut fw, synth, psa_seed)?
    };

    let mean_adv = tape.mean_all(adv)?;
    let neg_adv = tape.scalar_mul(mean_adv, -1.0);

    let mut target = Vec::with_capacity(b * label_dim);
    for l in labels {
        target.extend(smooth_labels(l, cfg.smoothing_eps).to_vec());
    }
    let target = tape.leaf(&[b, label_dim], target, false)?;
    let lmse = weighted_label_mse(tape, label_pred, target, &cfg.weights_vec(label_dim))?;
    let label_term = tape.scalar_mul(lmse, cfg.lambda_label);
    let total = tape.add(neg_adv, label_term)?;

    let parts = GeneratorLossParts {
        total: tape.data(total)[0],
        adv_syn: tape.data(mean_adv)[0],
        label_mse: tape.data(lmse)[0],
    };
    Ok((total, parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_zero_when_equal() {
        let mut tape = Tape::new();
        let p = tape.leaf(&[1, 3], vec![0.2, 0.5, 0.3], false).unwrap();
        let t = tape.leaf(&[1, 3], vec![0.2, 0.5, 0.3], false).unwrap();
        let m = weighted_label_mse(&mut tape, p, t, &[1.0; 3]).unwrap();
        assert_eq!(tape.data(m)[0], 0.0);
    }

    #[test]
    fn mse_uniform_weights_arithmetic() {
        let mut tape = Tape::new();
        let p = tape.leaf(&[1, 3], vec![1.0, 0.0, 0.0], false).unwrap();
        let t = tape.leaf(&[1, 3], vec![0.0, 0.0, 0.0], false).unwrap();
        let m = weighted_label_mse(&mut tape, p, t, &[1.0; 3]).unwrap();
        assert!((tape.data(m)[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mse_weight_vector_arithmetic() {
        let mut tape = Tape::new();
        let p = tape.leaf(&[1, 3], vec![1.0, 0.0, 0.0], false).unwrap();
        let t = tape.leaf(&[1, 3], vec![0.0, 0.0, 0.0], false).unwrap();
        let m = weighted_label_mse(&mut tape, p, t, &[2.0, 0.0, 0.0]).unwrap();
        assert!((tape.data(m)[0] - 2.0 / 3.0).abs() < 1e-15);
    }

    /// Analytic critic `D(x) = c / sqrt(N) * sum(x)` has gradient norm `|c|`.
    fn sum_critic(scale: f64) -> impl Fn(&mut Tape, TensorId) -> Result<TensorId, GanError> {
        move |tape, x| {
            let shape = tape.shape(x).to_vec();
            let (b, n) = (shape[0], shape[1] * shape[2]);
            let st = tape.sum_axis(x, 1)?;
            let sd = tape.sum_axis(st, 2)?;
            let flat = tape.reshape(sd, &[b])?;
            Ok(tape.scalar_mul(flat, scale / (n as f64).sqrt()))
        }
    }

    #[test]
    fn unit_gradient_norm_gives_zero_penalty() {
        let mut tape = Tape::new();
        let shape = [2usize, 4, 2];
        let real: Vec<f64> = (0..16).map(|i| i as f64 * 0.1).collect();
        let syn: Vec<f64> = (0..16).map(|i| (15 - i) as f64 * 0.05).collect();
        let pen = gradient_penalty(&mut tape, &real, &syn, &shape, &[0.3, 0.8], sum_critic(1.0)).unwrap();
        assert!(tape.data(pen)[0].abs() < 1e-24, "{}", tape.data(pen)[0]);
    }

    #[test]
    fn doubled_critic_gives_unit_penalty() {
        let mut tape = Tape::new();
        let shape = [2usize, 4, 2];
        let real = vec![0.25; 16];
        let syn = vec![-0.5; 16];
        let pen = gradient_penalty(&mut tape, &real, &syn, &shape, &[0.1, 0.9], sum_critic(2.0)).unwrap();
        assert!((tape.data(pen)[0] - 1.0).abs() < 1e-12, "{}", tape.data(pen)[0]);
    }

    #[test]
    fn penalty_nonnegative_and_differentiable() {
        // nonlinear critic with a trainable weight: the penalty must give a
        // finite gradient through the double backward
        let mut tape = Tape::new();
        let w = tape.leaf(&[1], vec![1.3], true).unwrap();
        let shape = [2usize, 2, 2];
        let real = vec![0.4, -0.2, 0.9, 0.1, 0.3, 0.8, -0.6, 0.2];
        let syn = vec![0.0; 8];
        let pen = gradient_penalty(&mut tape, &real, &syn, &shape, &[0.5, 0.5], |tape, x| {
            let shape = tape.shape(x).to_vec();
            let sq = tape.square(x);
            let wb3 = tape.reshape(w, &[1, 1, 1])?;
            let wb3 = tape.broadcast_axis(wb3, 2, shape[2])?;
            let wb3 = tape.broadcast_axis(wb3, 1, shape[1])?;
            let wb3 = tape.broadcast_axis(wb3, 0, shape[0])?;
            let scaled = tape.mul(sq, wb3)?;
            let st = tape.sum_axis(scaled, 1)?;
            let sd = tape.sum_axis(st, 2)?;
            Ok(tape.reshape(sd, &[shape[0]])?)
        })
        .unwrap();
        let v = tape.data(pen)[0];
        assert!(v >= 0.0 && v.is_finite());
        let gm = tape.backward(pen).unwrap();
        let gw = gm.grad_vec(&tape, w);
        assert!(gw[0].is_finite() && gw[0] != 0.0, "grad {gw:?}");
    }
}
