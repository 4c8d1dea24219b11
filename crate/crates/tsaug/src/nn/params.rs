//! Named parameter storage shared by the generator and critic, plus the
//! per-forward binding of parameters onto a tape.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::tensor::{Result, Tape, TensorId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    /// Adam first moment.
    pub m: Vec<f64>,
    /// Adam second moment.
    pub v: Vec<f64>,
}

/// Insertion-ordered parameter table. Order is stable, which keeps optimizer
/// sweeps and checkpoint bytes deterministic.
#[derive(Debug, Default, Clone)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], data: Vec<f64>) -> ParamId {
        let name = name.into();
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "param {name}: data length vs shape {shape:?}"
        );
        debug_assert!(
            !self.params.iter().any(|p| p.name == name),
            "duplicate param name {name}"
        );
        let n = data.len();
        let id = ParamId(self.params.len());
        self.params.push(Param {
            name,
            shape: shape.to_vec(),
            data,
            m: vec![0.0; n],
            v: vec![0.0; n],
        });
        id
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn set_data(&mut self, id: ParamId, data: Vec<f64>) {
        assert_eq!(data.len(), self.params[id.0].data.len());
        self.params[id.0].data = data;
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn all_ids(&self) -> Vec<ParamId> {
        (0..self.params.len()).map(ParamId).collect()
    }
}

// ── initializers ────────────────────────────────────────────────────────

pub fn normal_init(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * std).collect()
}

/// Xavier/Glorot scale for a linear map.
pub fn xavier_init(rng: &mut ChaCha8Rng, fan_in: usize, fan_out: usize) -> Vec<f64> {
    let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
    normal_init(rng, fan_in * fan_out, std)
}

/// Per-forward parameter binding. Bound leaves are cached so an operator that
/// reuses a weight (grid attention across partitions) shares one leaf and its
/// gradient accumulates there.
pub struct Binder {
    trainable: bool,
    bound: Vec<Option<TensorId>>,
}

impl Binder {
    pub fn new(store: &ParamStore, trainable: bool) -> Self {
        Self { trainable, bound: vec![None; store.len()] }
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn bind(&mut self, tape: &mut Tape, store: &ParamStore, id: ParamId) -> Result<TensorId> {
        if self.bound.len() < store.len() {
            self.bound.resize(store.len(), None);
        }
        if let Some(t) = self.bound[id.0] {
            return Ok(t);
        }
        let p = store.get(id);
        let t = tape.leaf(&p.shape, p.data.clone(), self.trainable)?;
        self.bound[id.0] = Some(t);
        Ok(t)
    }

    pub fn bound_id(&self, id: ParamId) -> Option<TensorId> {
        self.bound.get(id.0).copied().flatten()
    }

    /// Substitute an existing tape tensor for a parameter. Gradient checking
    /// uses this to make the loss an explicit function of chosen leaves.
    pub fn preset(&mut self, id: ParamId, tensor: TensorId) {
        if self.bound.len() <= id.0 {
            self.bound.resize(id.0 + 1, None);
        }
        self.bound[id.0] = Some(tensor);
    }
}

/// Everything a block forward needs: the tape being built, the parameter
/// values, and the binding cache.
pub struct Fwd<'a> {
    pub tape: &'a mut Tape,
    pub store: &'a ParamStore,
    pub binder: &'a mut Binder,
}

impl<'a> Fwd<'a> {
    pub fn new(tape: &'a mut Tape, store: &'a ParamStore, binder: &'a mut Binder) -> Self {
        Self { tape, store, binder }
    }

    pub fn bind(&mut self, id: ParamId) -> Result<TensorId> {
        self.binder.bind(self.tape, self.store, id)
    }
}

/// Linear map `x @ W + b` applied to the last axis.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
    ) -> Self {
        let w = store.add(format!("{name}.w"), &[in_dim, out_dim], xavier_init(rng, in_dim, out_dim));
        let b = bias.then(|| store.add(format!("{name}.b"), &[out_dim], vec![0.0; out_dim]));
        Self { w, b, in_dim, out_dim }
    }

    pub fn forward(&self, fw: &mut Fwd, x: TensorId) -> Result<TensorId> {
        let w = fw.bind(self.w)?;
        let mut y = fw.tape.matmul(x, w)?;
        if let Some(b) = self.b {
            let b = fw.bind(b)?;
            y = fw.tape.broadcast_add(y, b)?;
        }
        Ok(y)
    }
}
