//! Instance normalization over the time axis, per channel and per sample,
//! followed by a learned per-channel affine.

use rand_chacha::ChaCha8Rng;

use crate::nn::params::{Fwd, ParamId, ParamStore};
use crate::tensor::{Result, Tape, TensorError, TensorId};

// Bounds the normalization gain at 1/sqrt(eps) ~= 32 so a near-constant
// channel cannot blow up the gradient-penalty path; the variance bias on
// unit-scale channels is ~0.1%.
pub const INSTANCE_NORM_EPS: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct InstanceNorm {
    pub gain: ParamId,
    pub bias: ParamId,
    pub d: usize,
}

impl InstanceNorm {
    pub fn new(store: &mut ParamStore, _rng: &mut ChaCha8Rng, name: &str, d: usize) -> Self {
        let gain = store.add(format!("{name}.gain"), &[d], vec![1.0; d]);
        let bias = store.add(format!("{name}.bias"), &[d], vec![0.0; d]);
        Self { gain, bias, d }
    }

    pub fn forward(&self, fw: &mut Fwd, x: TensorId) -> Result<TensorId> {
        let gain = fw.bind(self.gain)?;
        let bias = fw.bind(self.bias)?;
        instance_norm(fw.tape, x, gain, bias, INSTANCE_NORM_EPS)
    }
}

/// Per sample and per channel: subtract the mean over T, divide by
/// `sqrt(var + eps)`, then apply the per-channel gain and bias.
pub fn instance_norm(
    tape: &mut Tape,
    x: TensorId,
    gain: TensorId,
    bias: TensorId,
    eps: f64,
) -> Result<TensorId> {
    let shape = tape.shape(x).to_vec();
    let [b, t, d] = shape.as_slice() else {
        return Err(TensorError::ShapeMismatch {
            op: "instance_norm",
            detail: format!("need rank 3, got {shape:?}"),
        });
    };
    let (b, t, d) = (*b, *t, *d);
    if t < 2 {
        return Err(TensorError::ShapeMismatch {
            op: "instance_norm",
            detail: format!("time extent {t} < 2"),
        });
    }
    if tape.numel(gain) != d || tape.numel(bias) != d {
        return Err(TensorError::ShapeMismatch {
            op: "instance_norm",
            detail: format!("gain/bias length vs depth {d}"),
        });
    }
    let mean = tape.mean_axis(x, 1)?; // [B,1,D]
    let mean_b = tape.broadcast_axis(mean, 1, t)?;
    let centered = tape.sub(x, mean_b)?;
    let sq = tape.square(centered);
    let var = tape.mean_axis(sq, 1)?;
    let var_eps = tape.add_scalar(var, eps);
    let std = tape.sqrt(var_eps)?;
    let inv = tape.recip(std)?;
    let inv_b = tape.broadcast_axis(inv, 1, t)?;
    let normed = tape.mul(centered, inv_b)?;

    let g3 = tape.reshape(gain, &[1, 1, d])?;
    let g3 = tape.broadcast_axis(g3, 1, t)?;
    let g3 = tape.broadcast_axis(g3, 0, b)?;
    let scaled = tape.mul(normed, g3)?;
    tape.broadcast_add(scaled, bias)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain_norm(tape: &mut Tape, x: TensorId, d: usize) -> TensorId {
        let gain = tape.constant(&[d], vec![1.0; d]).unwrap();
        let bias = tape.constant(&[d], vec![0.0; d]).unwrap();
        instance_norm(tape, x, gain, bias, INSTANCE_NORM_EPS).unwrap()
    }

    #[test]
    fn constant_channel_maps_to_bias() {
        let mut tape = Tape::new();
        let x = tape.leaf(&[1, 4, 1], vec![3.0; 4], false).unwrap();
        let gain = tape.constant(&[1], vec![1.0]).unwrap();
        let bias = tape.constant(&[1], vec![0.25]).unwrap();
        let y = instance_norm(&mut tape, x, gain, bias, INSTANCE_NORM_EPS).unwrap();
        for &v in tape.data(y) {
            assert!((v - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn output_has_zero_mean_unit_variance() {
        let mut tape = Tape::new();
        let vals: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin() * 3.0 + 1.5).collect();
        let x = tape.leaf(&[1, 8, 2], vals, false).unwrap();
        let y = plain_norm(&mut tape, x, 2);
        let out = tape.data(y);
        for c in 0..2 {
            let ch: Vec<f64> = (0..8).map(|t| out[t * 2 + c]).collect();
            let mean: f64 = ch.iter().sum::<f64>() / 8.0;
            let var: f64 = ch.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 8.0;
            assert!(mean.abs() < 1e-12, "mean {mean}");
            // eps shifts the variance slightly below 1
            assert!((var - 1.0).abs() < 1e-3, "var {var}");
        }
    }

    #[test]
    fn scale_invariance() {
        // The normalization algebra is scale-free; eps is not. Checked at a
        // tiny eps so the 1e-9 bound reflects the algebra alone.
        let vals: Vec<f64> = (0..12).map(|i| (i as f64 * 1.3).cos() * 2.0 - 0.4).collect();
        let run = |scale: f64| -> Vec<f64> {
            let mut tape = Tape::new();
            let scaled: Vec<f64> = vals.iter().map(|v| v * scale).collect();
            let x = tape.leaf(&[1, 6, 2], scaled, false).unwrap();
            let gain = tape.constant(&[2], vec![1.0; 2]).unwrap();
            let bias = tape.constant(&[2], vec![0.0; 2]).unwrap();
            let y = instance_norm(&mut tape, x, gain, bias, 1e-12).unwrap();
            tape.data(y).to_vec()
        };
        let base = run(1.0);
        let scaled = run(5.0);
        for (a, b) in base.iter().zip(&scaled) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn single_step_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(&[1, 1, 2], vec![1.0, 2.0], false).unwrap();
        let gain = tape.constant(&[2], vec![1.0; 2]).unwrap();
        let bias = tape.constant(&[2], vec![0.0; 2]).unwrap();
        assert!(instance_norm(&mut tape, x, gain, bias, INSTANCE_NORM_EPS).is_err());
    }
}
