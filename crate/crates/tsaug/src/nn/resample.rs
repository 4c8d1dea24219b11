//! Temporal rescaling operators: distillation (conv + pool halving), cubic
//! up-sampling, and the pixel shuffle pair.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::nn::params::{Fwd, ParamId, ParamStore};
use crate::tensor::{InterpMap, Result, Tape, TensorError, TensorId};

/// Cubic-convolution kernel parameter. -0.5 (Catmull-Rom) is the unique
/// member of the Keys family whose interpolation reproduces linear signals
/// exactly, which the up-sampler is tested against.
pub const CUBIC_A: f64 = -0.5;

/// Distillation stage: depthwise width-3 convolution, ELU, then max pooling
/// of width 3 / stride 2 / pad 1. Halves the temporal extent exactly.
#[derive(Debug, Clone)]
pub struct Distill {
    pub conv_w: ParamId,
    pub conv_b: ParamId,
    pub d: usize,
}

impl Distill {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, d: usize) -> Self {
        // identity-leaning start: center tap 1 plus small noise
        let mut w = vec![0.0; 3 * d];
        let noise = crate::nn::params::normal_init(rng, 3 * d, 0.05);
        for c in 0..d {
            w[d + c] = 1.0;
        }
        for (wi, ni) in w.iter_mut().zip(noise) {
            *wi += ni;
        }
        let conv_w = store.add(format!("{name}.conv_w"), &[3, d], w);
        let conv_b = store.add(format!("{name}.conv_b"), &[d], vec![0.0; d]);
        Self { conv_w, conv_b, d }
    }

    /// Exact identity initialization (center tap 1, no noise); test hook.
    pub fn set_identity(&self, store: &mut ParamStore) {
        let mut w = vec![0.0; 3 * self.d];
        for c in 0..self.d {
            w[self.d + c] = 1.0;
        }
        store.set_data(self.conv_w, w);
        store.set_data(self.conv_b, vec![0.0; self.d]);
    }

    pub fn forward(&self, fw: &mut Fwd, x: TensorId) -> Result<TensorId> {
        let shape = fw.tape.shape(x).to_vec();
        let [_, t, d] = shape.as_slice() else {
            return Err(TensorError::ShapeMismatch {
                op: "distill_halve",
                detail: format!("need rank 3, got {shape:?}"),
            });
        };
        if *t < 2 || t % 2 != 0 {
            return Err(TensorError::ShapeMismatch {
                op: "distill_halve",
                detail: format!("time extent {t} must be even and >= 2"),
            });
        }
        if *d != self.d {
            return Err(TensorError::ShapeMismatch {
                op: "distill_halve",
                detail: format!("depth {d} vs kernel depth {}", self.d),
            });
        }
        let k = fw.bind(self.conv_w)?;
        let b = fw.bind(self.conv_b)?;
        let conv = fw.tape.conv1d_depthwise(x, k, 1, 1)?;
        let conv = fw.tape.broadcast_add(conv, b)?;
        let act = fw.tape.elu(conv);
        fw.tape.max_pool1d(act, 3, 2, 1)
    }
}

/// Keys cubic-convolution kernel.
fn cubic_weight(x: f64) -> f64 {
    let a = CUBIC_A;
    let x = x.abs();
    if x <= 1.0 {
        (a + 2.0) * x * x * x - (a + 3.0) * x * x + 1.0
    } else if x < 2.0 {
        a * x * x * x - 5.0 * a * x * x + 8.0 * a * x - 4.0 * a
    } else {
        0.0
    }
}

/// Row-mixing map for x2 cubic up-sampling with half-pixel alignment and edge
/// replication.
pub fn bicubic_map(t: usize) -> InterpMap {
    let mut fwd = Vec::with_capacity(2 * t);
    for to in 0..2 * t {
        let s = (to as f64 + 0.5) / 2.0 - 0.5;
        let i0 = s.floor() as isize;
        let frac = s - i0 as f64;
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(4);
        for tap in -1..=2isize {
            let w = cubic_weight(frac - tap as f64);
            if w == 0.0 {
                continue;
            }
            let ti = (i0 + tap).clamp(0, t as isize - 1) as usize;
            // edge replication: clamped taps merge their weight
            match row.iter_mut().find(|(i, _)| *i == ti) {
                Some((_, acc)) => *acc += w,
                None => row.push((ti, w)),
            }
        }
        fwd.push(row);
    }
    InterpMap::new(t, 2 * t, fwd)
}

/// Per channel, 1-D cubic interpolation doubling the time dimension; depth is
/// unchanged.
pub fn upsample_bicubic(tape: &mut Tape, x: TensorId) -> Result<TensorId> {
    let shape = tape.shape(x).to_vec();
    let [_, t, _] = shape.as_slice() else {
        return Err(TensorError::ShapeMismatch {
            op: "upsample_bicubic",
            detail: format!("need rank 3, got {shape:?}"),
        });
    };
    if *t < 2 {
        return Err(TensorError::ShapeMismatch {
            op: "upsample_bicubic",
            detail: format!("time extent {t} < 2"),
        });
    }
    let map = Arc::new(bicubic_map(*t));
    tape.interp_rows(x, map)
}

/// `[B,T,D] -> [B,2T,D/2]`, lossless rearrangement.
pub fn pixel_shuffle(tape: &mut Tape, x: TensorId) -> Result<TensorId> {
    tape.pixel_shuffle(x)
}

/// Exact inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle(tape: &mut Tape, x: TensorId) -> Result<TensorId> {
    tape.pixel_unshuffle(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Binder;
    use rand::SeedableRng;

    #[test]
    fn distill_halves_time_to_one() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = Distill::new(&mut store, &mut rng, "d", 2);
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store, false);
        let mut fw = Fwd::new(&mut tape, &store, &mut binder);
        let x = fw.tape.leaf(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0], false).unwrap();
        let y = d.forward(&mut fw, x).unwrap();
        assert_eq!(tape.shape(y), &[1, 1, 2]);
    }

    #[test]
    fn identity_conv_on_constant_input() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dis = Distill::new(&mut store, &mut rng, "d", 3);
        dis.set_identity(&mut store);
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store, false);
        let mut fw = Fwd::new(&mut tape, &store, &mut binder);
        let x = fw.tape.leaf(&[1, 8, 3], vec![2.5; 24], false).unwrap();
        let y = dis.forward(&mut fw, x).unwrap();
        assert_eq!(tape.shape(y), &[1, 4, 3]);
        for &v in tape.data(y) {
            assert!((v - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn odd_time_rejected() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let d = Distill::new(&mut store, &mut rng, "d", 1);
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store, false);
        let mut fw = Fwd::new(&mut tape, &store, &mut binder);
        let x = fw.tape.zeros(&[1, 3, 1]).unwrap();
        assert!(d.forward(&mut fw, x).is_err());
    }

    #[test]
    fn bicubic_reproduces_constants() {
        let mut tape = Tape::new();
        let x = tape.leaf(&[1, 6, 2], vec![1.7; 12], false).unwrap();
        let y = upsample_bicubic(&mut tape, x).unwrap();
        assert_eq!(tape.shape(y), &[1, 12, 2]);
        for &v in tape.data(y) {
            assert!((v - 1.7).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn bicubic_reproduces_linear_ramp_interior() {
        let t = 16;
        let ramp: Vec<f64> = (0..t).map(|i| 0.5 * i as f64 - 2.0).collect();
        let mut tape = Tape::new();
        let x = tape.leaf(&[1, t, 1], ramp, false).unwrap();
        let y = upsample_bicubic(&mut tape, x).unwrap();
        let out = tape.data(y);
        // output position to maps to source coordinate (to+0.5)/2 - 0.5
        for to in 4..2 * t - 4 {
            let s = (to as f64 + 0.5) / 2.0 - 0.5;
            let want = 0.5 * s - 2.0;
            assert!((out[to] - want).abs() < 1e-9, "t'={to}: {} vs {want}", out[to]);
        }
    }

    #[test]
    fn upsample_length_is_exactly_doubled() {
        let mut tape = Tape::new();
        let x = tape.leaf(&[2, 5, 3], vec![0.3; 30], false).unwrap();
        let y = upsample_bicubic(&mut tape, x).unwrap();
        assert_eq!(tape.shape(y), &[2, 10, 3]);
    }
}
