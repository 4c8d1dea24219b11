//! Reverse-mode sweep. Adjoints are emitted as ordinary tape nodes, so the
//! result of one backward pass can feed a second one (double backward).

use std::sync::Arc;

use super::{Op, Result, Tape, TensorError, TensorId};

/// Gradients produced by one [`Tape::backward`] call. Values stay on the tape;
/// the map records which node holds each gradient.
pub struct GradMap {
    grads: Vec<Option<TensorId>>,
}

impl GradMap {
    /// Tape node holding the gradient of the loss w.r.t. `id`, if `id`
    /// influenced the loss.
    pub fn grad_id(&self, id: TensorId) -> Option<TensorId> {
        self.grads.get(id.0).copied().flatten()
    }

    /// Gradient values for `id`; zeros when the leaf did not influence the loss.
    pub fn grad_vec(&self, tape: &Tape, id: TensorId) -> Vec<f64> {
        match self.grad_id(id) {
            Some(g) => tape.data(g).to_vec(),
            None => vec![0.0; tape.numel(id)],
        }
    }
}

impl Tape {
    /// Reverse-mode differentiation of a scalar `loss`. Every node reachable
    /// from a `requires_grad` leaf receives an adjoint; adjoints of shared
    /// inputs accumulate additively.
    pub fn backward(&mut self, loss: TensorId) -> Result<GradMap> {
        if self.numel(loss) != 1 {
            return Err(TensorError::NonScalarLoss { numel: self.numel(loss) });
        }
        let frontier = loss.0 + 1;
        let mut grads: Vec<Option<TensorId>> = vec![None; frontier];
        let seed = self.constant(&[1], vec![1.0])?;
        grads[loss.0] = Some(seed);

        for i in (0..frontier).rev() {
            let Some(g) = grads[i] else { continue };
            if !self.requires_grad(TensorId(i)) {
                continue;
            }
            let op = self.nodes[i].op.clone();
            let contributions = self.vjp(TensorId(i), g, &op)?;
            for (input, contrib) in contributions {
                if !self.requires_grad(input) {
                    continue;
                }
                grads[input.0] = Some(match grads[input.0] {
                    Some(acc) => self.add(acc, contrib)?,
                    None => contrib,
                });
            }
        }
        Ok(GradMap { grads })
    }

    /// Adjoint contributions of one node: `(input, d loss/d input)` pairs.
    fn vjp(&mut self, out: TensorId, g: TensorId, op: &Op) -> Result<Vec<(TensorId, TensorId)>> {
        Ok(match op {
            Op::Leaf => vec![],

            Op::Add(a, b) => vec![(*a, g), (*b, g)],
            Op::Sub(a, b) => {
                let ng = self.scalar_mul(g, -1.0);
                vec![(*a, g), (*b, ng)]
            }
            Op::Mul(a, b) => {
                let ga = self.mul(g, *b)?;
                let gb = self.mul(g, *a)?;
                vec![(*a, ga), (*b, gb)]
            }
            Op::ScalarMul(a, c) => vec![(*a, self.scalar_mul(g, *c))],
            Op::AddScalar(a) => vec![(*a, g)],

            Op::Matmul(a, b) => {
                let (ar, br) = (self.shape(*a).len(), self.shape(*b).len());
                let bt = self.transpose(*b)?;
                let ga = self.matmul(g, bt)?; // matches a's rank for all variants
                let at = self.transpose(*a)?;
                let gb_full = self.matmul(at, g)?;
                let gb = if ar == 3 && br == 2 {
                    // [B,k,m] x [B,m,n] -> [B,k,n]; weight grad sums over batch
                    let summed = self.sum_axis(gb_full, 0)?;
                    let shape: Vec<usize> = self.shape(*b).to_vec();
                    self.reshape(summed, &shape)?
                } else {
                    gb_full
                };
                vec![(*a, ga), (*b, gb)]
            }
            Op::Transpose(a) => vec![(*a, self.transpose(g)?)],
            Op::Reshape(a) => {
                let shape: Vec<usize> = self.shape(*a).to_vec();
                vec![(*a, self.reshape(g, &shape)?)]
            }

            Op::Concat { axis, parts } => {
                let mut out_pairs = Vec::with_capacity(parts.len());
                let mut start = 0;
                for &p in parts {
                    let ext = self.shape(p)[*axis];
                    let gp = self.slice(g, *axis, start, ext)?;
                    out_pairs.push((p, gp));
                    start += ext;
                }
                out_pairs
            }
            Op::Slice { a, axis, start } => {
                let ash: Vec<usize> = self.shape(*a).to_vec();
                let len = self.shape(out)[*axis];
                let mut pieces = Vec::new();
                if *start > 0 {
                    let mut sh = ash.clone();
                    sh[*axis] = *start;
                    pieces.push(self.zeros(&sh)?);
                }
                pieces.push(g);
                let after = ash[*axis] - start - len;
                if after > 0 {
                    let mut sh = ash.clone();
                    sh[*axis] = after;
                    pieces.push(self.zeros(&sh)?);
                }
                vec![(*a, self.concat(&pieces, *axis)?)]
            }

            Op::SumAxis { a, axis } => {
                let n = self.shape(*a)[*axis];
                vec![(*a, self.broadcast_axis(g, *axis, n)?)]
            }
            Op::BroadcastAxis { a, axis } => vec![(*a, self.sum_axis(g, *axis)?)],

            Op::Softmax(a) => {
                // ds = s * (g - sum_last(g * s))
                let prod = self.mul(g, out)?;
                let rank = self.shape(out).len();
                let n = *self.shape(out).last().unwrap();
                let rowsum = self.sum_axis(prod, rank - 1)?;
                let bsum = self.broadcast_axis(rowsum, rank - 1, n)?;
                let centered = self.sub(g, bsum)?;
                vec![(*a, self.mul(out, centered)?)]
            }

            Op::Exp(a) => vec![(*a, self.mul(g, out)?)],
            Op::Log(a) => {
                let r = self.recip(*a)?;
                vec![(*a, self.mul(g, r)?)]
            }
            Op::Sqrt(a) => {
                // d sqrt = g / (2 sqrt(x))
                let r = self.recip(out)?;
                let half = self.scalar_mul(r, 0.5);
                vec![(*a, self.mul(g, half)?)]
            }
            Op::Square(a) => {
                let two = self.scalar_mul(*a, 2.0);
                vec![(*a, self.mul(g, two)?)]
            }
            Op::Recip(a) => {
                // d(1/x) = -g / x^2
                let sq = self.mul(out, out)?;
                let m = self.mul(g, sq)?;
                vec![(*a, self.scalar_mul(m, -1.0))]
            }
            Op::Sigmoid(a) => {
                let neg = self.scalar_mul(out, -1.0);
                let one_minus = self.add_scalar(neg, 1.0);
                let d = self.mul(out, one_minus)?;
                vec![(*a, self.mul(g, d)?)]
            }
            Op::LeakyRelu(a, slope) => {
                let shape: Vec<usize> = self.shape(*a).to_vec();
                let mask: Vec<f64> = self
                    .data(*a)
                    .iter()
                    .map(|&x| if x >= 0.0 { 1.0 } else { *slope })
                    .collect();
                let m = self.constant(&shape, mask)?;
                vec![(*a, self.mul(g, m)?)]
            }
            Op::Elu(a) => {
                // elu'(x) = 1 for x > 0, exp(x) otherwise. The negative-side
                // exp stays on the tape so second derivatives are exact; the
                // positive side is masked before exp to avoid overflow.
                let shape: Vec<usize> = self.shape(*a).to_vec();
                let pos: Vec<f64> = self.data(*a).iter().map(|&x| if x > 0.0 { 1.0 } else { 0.0 }).collect();
                let neg: Vec<f64> = pos.iter().map(|&m| 1.0 - m).collect();
                let pos_c = self.constant(&shape, pos)?;
                let neg_c = self.constant(&shape, neg)?;
                let masked = self.mul(*a, neg_c)?;
                let e = self.exp(masked);
                let neg_term = self.mul(neg_c, e)?;
                let deriv = self.add(pos_c, neg_term)?;
                vec![(*a, self.mul(g, deriv)?)]
            }

            Op::MaxPool1d { a, argmax } => {
                let shape: Vec<usize> = self.shape(*a).to_vec();
                vec![(*a, self.elem_scatter(g, argmax.clone(), shape))]
            }
            Op::GatherRows { a, idx } => {
                let t = self.shape(*a)[1];
                vec![(*a, self.scatter_rows(g, idx.clone(), t)?)]
            }
            Op::ScatterRows { a, idx } => vec![(*a, self.gather_rows(g, idx.clone())?)],
            Op::ElemGather { a, idx } => {
                let shape: Vec<usize> = self.shape(*a).to_vec();
                vec![(*a, self.elem_scatter(g, idx.clone(), shape))]
            }
            Op::ElemScatter { a, idx } => {
                let shape: Vec<usize> = self.shape(*a).to_vec();
                vec![(*a, self.elem_gather(g, idx.clone(), shape))]
            }
            Op::PixelShuffle(a) => vec![(*a, self.pixel_unshuffle(g)?)],
            Op::PixelUnshuffle(a) => vec![(*a, self.pixel_shuffle(g)?)],
            Op::SwapNegatePairs(a) => {
                // The pair map P is antisymmetric: P^T = -P.
                let s = self.swap_negate_pairs(g)?;
                vec![(*a, self.scalar_mul(s, -1.0))]
            }
            Op::InterpRows { a, map, reverse } => {
                let m: Arc<_> = map.clone();
                vec![(*a, self.interp_rows_dir(g, m, !reverse)?)]
            }
        })
    }
}
