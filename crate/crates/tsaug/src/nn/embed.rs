//! Token embeddings: learned absolute positional tables and patch embedding.

use rand_chacha::ChaCha8Rng;

use crate::nn::params::{Fwd, Linear, ParamId, ParamStore};
use crate::tensor::{Result, TensorError, TensorId};

/// Learned absolute positional embedding for one injection site: a T x D
/// table added to every sample. Tables start at zero.
#[derive(Debug, Clone)]
pub struct LapeTable {
    pub table: ParamId,
    pub t: usize,
    pub d: usize,
}

impl LapeTable {
    pub fn new(store: &mut ParamStore, name: &str, t: usize, d: usize) -> Self {
        let table = store.add(format!("{name}.table"), &[t, d], vec![0.0; t * d]);
        Self { table, t, d }
    }

    pub fn forward(&self, fw: &mut Fwd, x: TensorId) -> Result<TensorId> {
        let shape = fw.tape.shape(x).to_vec();
        if shape.len() != 3 || shape[1] != self.t || shape[2] != self.d {
            return Err(TensorError::ShapeMismatch {
                op: "lape_add",
                detail: format!("table {}x{} vs input {shape:?}", self.t, self.d),
            });
        }
        let table = fw.bind(self.table)?;
        let t3 = fw.tape.reshape(table, &[1, self.t, self.d])?;
        let tb = fw.tape.broadcast_axis(t3, 0, shape[0])?;
        fw.tape.add(x, tb)
    }
}

/// ViT-style patching: non-overlapping length-`patch_len` chunks of the
/// window are flattened and linearly projected to `d_model` tokens.
#[derive(Debug, Clone)]
pub struct PatchEmbed {
    pub proj: Linear,
    pub patch_len: usize,
    pub in_depth: usize,
    pub d_model: usize,
}

impl PatchEmbed {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        patch_len: usize,
        in_depth: usize,
        d_model: usize,
    ) -> Self {
        let proj = Linear::new(store, rng, &format!("{name}.proj"), patch_len * in_depth, d_model, true);
        Self { proj, patch_len, in_depth, d_model }
    }

    pub fn forward(&self, fw: &mut Fwd, window: TensorId) -> Result<TensorId> {
        let shape = fw.tape.shape(window).to_vec();
        let [b, t, d] = shape.as_slice() else {
            return Err(TensorError::ShapeMismatch {
                op: "patch_embed",
                detail: format!("need rank 3, got {shape:?}"),
            });
        };
        if *d != self.in_depth || t % self.patch_len != 0 {
            return Err(TensorError::ShapeMismatch {
                op: "patch_embed",
                detail: format!("patch {} on {shape:?} (depth {})", self.patch_len, self.in_depth),
            });
        }
        // time-major layout: each patch is already contiguous
        let tokens = t / self.patch_len;
        let flat = fw.tape.reshape(window, &[*b, tokens, self.patch_len * d])?;
        self.proj.forward(fw, flat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::Binder;
    use crate::tensor::Tape;
    use rand::SeedableRng;

    #[test]
    fn zero_table_is_identity() {
        let mut store = ParamStore::new();
        let lape = LapeTable::new(&mut store, "lape", 3, 2);
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store, false);
        let mut fw = Fwd::new(&mut tape, &store, &mut binder);
        let xdata = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let x = fw.tape.leaf(&[1, 3, 2], xdata.clone(), false).unwrap();
        let y = lape.forward(&mut fw, x).unwrap();
        assert_eq!(tape.data(y), xdata.as_slice());
    }

    #[test]
    fn zero_input_returns_table_per_sample() {
        let mut store = ParamStore::new();
        let lape = LapeTable::new(&mut store, "lape", 2, 2);
        store.set_data(lape.table, vec![1.0, 2.0, 3.0, 4.0]);
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store, false);
        let mut fw = Fwd::new(&mut tape, &store, &mut binder);
        let x = fw.tape.zeros(&[2, 2, 2]).unwrap();
        let y = lape.forward(&mut fw, x).unwrap();
        assert_eq!(tape.data(y), &[1.0, 2.0, 3.0, 4.0, 1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn lape_gradient_reaches_table() {
        let mut store = ParamStore::new();
        let lape = LapeTable::new(&mut store, "lape", 2, 2);
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store, true);
        let mut fw = Fwd::new(&mut tape, &store, &mut binder);
        let x = fw.tape.leaf(&[3, 2, 2], vec![0.5; 12], false).unwrap();
        let y = lape.forward(&mut fw, x).unwrap();
        let loss = tape.sum_all(y).unwrap();
        let gm = tape.backward(loss).unwrap();
        let table_leaf = binder.bound_id(lape.table).unwrap();
        // each table element is added to all 3 batch samples
        assert_eq!(gm.grad_vec(&tape, table_leaf), vec![3.0; 4]);
    }

    #[test]
    fn patch_len_one_identity_projection_passes_channels_through() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pe = PatchEmbed::new(&mut store, &mut rng, "pe", 1, 2, 2);
        store.set_data(pe.proj.w, vec![1.0, 0.0, 0.0, 1.0]);
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store, false);
        let mut fw = Fwd::new(&mut tape, &store, &mut binder);
        let xdata = vec![1.0, 10.0, 2.0, 20.0];
        let x = fw.tape.leaf(&[1, 2, 2], xdata.clone(), false).unwrap();
        let y = pe.forward(&mut fw, x).unwrap();
        assert_eq!(tape.data(y), xdata.as_slice());
    }

    #[test]
    fn token_count_and_hand_projection() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // patch_len 2, depth 1, d_model 1, projection = [1, 10]^T
        let pe = PatchEmbed::new(&mut store, &mut rng, "pe", 2, 1, 1);
        store.set_data(pe.proj.w, vec![1.0, 10.0]);
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store, false);
        let mut fw = Fwd::new(&mut tape, &store, &mut binder);
        let x = fw.tape.leaf(&[1, 4, 1], vec![1.0, 2.0, 3.0, 4.0], false).unwrap();
        let y = pe.forward(&mut fw, x).unwrap();
        assert_eq!(tape.shape(y), &[1, 2, 1]);
        // patches (1,2) and (3,4): 1*1 + 2*10 = 21, 3*1 + 4*10 = 43
        assert_eq!(tape.data(y), &[21.0, 43.0]);
    }

    #[test]
    fn non_divisible_patch_rejected() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pe = PatchEmbed::new(&mut store, &mut rng, "pe", 3, 1, 2);
        let mut tape = Tape::new();
        let mut binder = Binder::new(&store, false);
        let mut fw = Fwd::new(&mut tape, &store, &mut binder);
        let x = fw.tape.zeros(&[1, 4, 1]).unwrap();
        assert!(pe.forward(&mut fw, x).is_err());
    }
}
