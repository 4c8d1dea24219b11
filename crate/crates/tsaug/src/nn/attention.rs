//! Multi-head self-attention in three flavors: canonical scaled dot-product,
//! grid attention (independent fixed-length partitions sharing one weight
//! set), and probabilistic sparse attention (full attention for the most
//! informative queries, mean-of-values for the rest).

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::nn::params::{Fwd, Linear, ParamStore};
use crate::nn::rope::rope_rotate;
use crate::tensor::{Result, Tape, TensorError, TensorId};

/// Attention flavor selector plus its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttnKind {
    Canonical,
    Grid { partition_len: usize },
    /// `factor` is the sampling factor c; the active budget per head is
    /// `min(T, ceil(c ln T))`.
    Psa { factor: f64 },
}

/// Shared hyperparameters of one transformer block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockParams {
    pub d_model: usize,
    pub n_heads: usize,
    pub ffn_mult: usize,
    pub attn: AttnKind,
}

impl BlockParams {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return Err(TensorError::InvalidShape {
                detail: format!("d_model {} not divisible by heads {}", self.d_model, self.n_heads),
            });
        }
        if (self.d_model / self.n_heads) % 2 != 0 {
            return Err(TensorError::InvalidShape {
                detail: format!("odd head dim {} (rotary pairs)", self.d_model / self.n_heads),
            });
        }
        Ok(())
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads
    }
}

/// Projection weights of one attention operator.
#[derive(Debug, Clone)]
pub struct Attention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub params: BlockParams,
}

impl Attention {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, params: BlockParams) -> Self {
        let d = params.d_model;
        Self {
            wq: Linear::new(store, rng, &format!("{name}.wq"), d, d, true),
            wk: Linear::new(store, rng, &format!("{name}.wk"), d, d, true),
            wv: Linear::new(store, rng, &format!("{name}.wv"), d, d, true),
            wo: Linear::new(store, rng, &format!("{name}.wo"), d, d, true),
            params,
        }
    }

    /// Dispatch on the configured attention kind. `seed` is only consumed by
    /// the sparse variant.
    pub fn forward(&self, fw: &mut Fwd, x: TensorId, positions: &[usize], seed: u64) -> Result<TensorId> {
        match self.params.attn {
            AttnKind::Canonical => attention_canonical(fw, self, x, positions),
            AttnKind::Grid { partition_len } => attention_grid(fw, self, x, positions, partition_len),
            AttnKind::Psa { factor } => attention_psa(fw, self, x, positions, factor, seed),
        }
    }
}

fn project_heads(
    fw: &mut Fwd,
    w: &Attention,
    x: TensorId,
) -> Result<(TensorId, TensorId, TensorId)> {
    let q = w.wq.forward(fw, x)?;
    let k = w.wk.forward(fw, x)?;
    let v = w.wv.forward(fw, x)?;
    Ok((q, k, v))
}

fn head_slice(tape: &mut Tape, x: TensorId, head: usize, d_head: usize) -> Result<TensorId> {
    tape.slice(x, 2, head * d_head, d_head)
}

/// Standard multi-head scaled dot-product self-attention with rotary position
/// embedding on queries and keys.
pub fn attention_canonical(
    fw: &mut Fwd,
    w: &Attention,
    x: TensorId,
    positions: &[usize],
) -> Result<TensorId> {
    w.params.validate()?;
    let (q, k, v) = project_heads(fw, w, x)?;
    let d_head = w.params.d_head();
    let scale = 1.0 / (d_head as f64).sqrt();
    let mut heads = Vec::with_capacity(w.params.n_heads);
    for h in 0..w.params.n_heads {
        let qh = head_slice(fw.tape, q, h, d_head)?;
        let kh = head_slice(fw.tape, k, h, d_head)?;
        let vh = head_slice(fw.tape, v, h, d_head)?;
        let qr = rope_rotate(fw.tape, qh, positions)?;
        let kr = rope_rotate(fw.tape, kh, positions)?;
        let kt = fw.tape.transpose(kr)?;
        let scores = fw.tape.matmul(qr, kt)?;
        let scaled = fw.tape.scalar_mul(scores, scale);
        let attn = fw.tape.softmax(scaled);
        heads.push(fw.tape.matmul(attn, vh)?);
    }
    let merged = fw.tape.concat(&heads, 2)?;
    w.wo.forward(fw, merged)
}

/// Attention within fixed-length partitions of the sequence, one shared
/// weight set looped over the partitions, outputs reassembled in order.
pub fn attention_grid(
    fw: &mut Fwd,
    w: &Attention,
    x: TensorId,
    positions: &[usize],
    partition_len: usize,
) -> Result<TensorId> {
    let t = fw.tape.shape(x)[1];
    if partition_len == 0 || t % partition_len != 0 {
        return Err(TensorError::ShapeMismatch {
            op: "attention_grid",
            detail: format!("partition {partition_len} does not divide T={t}"),
        });
    }
    if partition_len == t {
        // single partition: identical code path to canonical attention
        return attention_canonical(fw, w, x, positions);
    }
    let mut parts = Vec::with_capacity(t / partition_len);
    for s in 0..t / partition_len {
        let xs = fw.tape.slice(x, 1, s * partition_len, partition_len)?;
        let pos = &positions[s * partition_len..(s + 1) * partition_len];
        parts.push(attention_canonical(fw, w, xs, pos)?);
    }
    fw.tape.concat(&parts, 1)
}

/// Active-query budget: `min(T, ceil(c ln T))`.
pub fn psa_budget(t: usize, factor: f64) -> usize {
    ((factor * (t as f64).ln()).ceil() as usize).min(t)
}

/// Probabilistic sparse attention. Per head: a seeded sample of keys scores
/// every query by `max - mean` of its sampled affinities; the top-budget
/// queries get full attention over all keys, the rest emit the mean of V.
/// Selection indices are measurements, not differentiated through.
pub fn attention_psa(
    fw: &mut Fwd,
    w: &Attention,
    x: TensorId,
    positions: &[usize],
    factor: f64,
    seed: u64,
) -> Result<TensorId> {
    w.params.validate()?;
    let shape = fw.tape.shape(x).to_vec();
    let (b, t) = (shape[0], shape[1]);
    let d_head = w.params.d_head();
    let scale = 1.0 / (d_head as f64).sqrt();
    let budget = psa_budget(t, factor);

    let (q, k, v) = project_heads(fw, w, x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut heads = Vec::with_capacity(w.params.n_heads);

    for h in 0..w.params.n_heads {
        let qh = head_slice(fw.tape, q, h, d_head)?;
        let kh = head_slice(fw.tape, k, h, d_head)?;
        let vh = head_slice(fw.tape, v, h, d_head)?;
        let qr = rope_rotate(fw.tape, qh, positions)?;
        let kr = rope_rotate(fw.tape, kh, positions)?;

        // Mean of V over all keys: the output for inactive queries.
        let v_mean = fw.tape.mean_axis(vh, 1)?;
        let base = fw.tape.broadcast_axis(v_mean, 1, t)?;

        if budget == t || t == 1 {
            // Full budget: every query is active; keep the same assembled
            // path so the equivalence with canonical attention is exercised.
            let idx = Arc::new(vec![(0..t).collect::<Vec<usize>>()]);
            let out = psa_active(fw.tape, qr, kr, vh, &idx, scale, t)?;
            let zero = fw.tape.scalar_mul(base, 0.0);
            let combined = fw.tape.add(zero, out)?;
            heads.push(combined);
            continue;
        }

        // Measurement phase on values already on the tape (detached).
        let active = select_active_queries(fw.tape, qr, kr, scale, budget, &mut rng);
        let idx = Arc::new(active);

        let out_active = psa_active(fw.tape, qr, kr, vh, &idx, scale, t)?;
        // Mask the active rows out of the mean-of-V base, then add the
        // scattered full-attention rows.
        let mut mask = vec![1.0; b * t * d_head];
        for (bi, list) in idx.iter().enumerate() {
            for &ti in list {
                for c in 0..d_head {
                    mask[(bi * t + ti) * d_head + c] = 0.0;
                }
            }
        }
        let mask_c = fw.tape.constant(&[b, t, d_head], mask)?;
        let masked = fw.tape.mul(base, mask_c)?;
        let combined = fw.tape.add(masked, out_active)?;
        heads.push(combined);
    }
    let merged = fw.tape.concat(&heads, 2)?;
    w.wo.forward(fw, merged)
}

/// Full attention for the selected queries, scattered back to their rows.
fn psa_active(
    tape: &mut Tape,
    qr: TensorId,
    kr: TensorId,
    vh: TensorId,
    idx: &Arc<Vec<Vec<usize>>>,
    scale: f64,
    t: usize,
) -> Result<TensorId> {
    let q_act = tape.gather_rows(qr, idx.clone())?;
    let kt = tape.transpose(kr)?;
    let scores = tape.matmul(q_act, kt)?;
    let scaled = tape.scalar_mul(scores, scale);
    let attn = tape.softmax(scaled);
    let out = tape.matmul(attn, vh)?;
    tape.scatter_rows(out, idx.clone(), t)
}

/// Score each query by max-minus-mean of affinities against `budget` sampled
/// keys; return the top-budget query indices per batch element, ascending.
fn select_active_queries(
    tape: &Tape,
    qr: TensorId,
    kr: TensorId,
    scale: f64,
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let shape = tape.shape(qr).to_vec();
    let (b, t, d) = (shape[0], shape[1], shape[2]);
    let qd = tape.data(qr);
    let kd = tape.data(kr);
    let mut out = Vec::with_capacity(b);
    for bi in 0..b {
        let mut scored: Vec<(f64, usize)> = Vec::with_capacity(t);
        for qi in 0..t {
            let qrow = &qd[(bi * t + qi) * d..(bi * t + qi + 1) * d];
            let mut max = f64::NEG_INFINITY;
            let mut sum = 0.0;
            for _ in 0..budget {
                let kj = rng.gen_range(0..t);
                let krow = &kd[(bi * t + kj) * d..(bi * t + kj + 1) * d];
                let dot: f64 = qrow.iter().zip(krow).map(|(a, c)| a * c).sum::<f64>() * scale;
                if dot > max {
                    max = dot;
                }
                sum += dot;
            }
            scored.push((max - sum / budget as f64, qi));
        }
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        let mut chosen: Vec<usize> = scored[..budget].iter().map(|&(_, i)| i).collect();
        chosen.sort_unstable();
        out.push(chosen);
    }
    out
}
