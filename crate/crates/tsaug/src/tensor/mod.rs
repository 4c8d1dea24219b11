//! Dense rank-1..3 tensors with a reverse-mode differentiation tape.
//!
//! Every operation appends a node to a [`Tape`]; [`Tape::backward`] emits the
//! adjoint computation as ordinary tape nodes, so gradients are themselves
//! differentiable (needed by the critic's gradient penalty, which takes the
//! gradient of a gradient norm).
//!
//! Conventions: values are `f64`, data is row-major, and a rank-3 shape is
//! `[B, T, D]` (batch, time steps, channel depth). A scalar is shape `[1]`.

mod backward;
mod gradcheck;

pub use backward::GradMap;
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};

use std::fmt;
use std::sync::Arc;

pub type Result<T> = std::result::Result<T, TensorError>;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorError {
    /// Operand extents are incompatible with the requested operation.
    ShapeMismatch { op: &'static str, detail: String },
    /// Input values are outside the operation's domain (sqrt of a negative, ...).
    Domain { op: &'static str, detail: String },
    /// `backward` was asked to differentiate a non-scalar.
    NonScalarLoss { numel: usize },
    /// A shape with rank 0, rank > 3, or a zero extent.
    InvalidShape { detail: String },
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ShapeMismatch { op, detail } => write!(f, "{op}: shape mismatch: {detail}"),
            Self::Domain { op, detail } => write!(f, "{op}: domain error: {detail}"),
            Self::NonScalarLoss { numel } => {
                write!(f, "backward requires a scalar loss, got {numel} elements")
            }
            Self::InvalidShape { detail } => write!(f, "invalid shape: {detail}"),
        }
    }
}

impl std::error::Error for TensorError {}

/// Handle to a tensor stored on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(pub(crate) usize);

/// Sparse row-mixing map along the time axis, shared across batch and depth.
/// `fwd[t_out]` lists `(t_in, weight)` pairs; `rev` is the transpose.
#[derive(Debug)]
pub struct InterpMap {
    pub in_t: usize,
    pub out_t: usize,
    pub fwd: Vec<Vec<(usize, f64)>>,
    pub rev: Vec<Vec<(usize, f64)>>,
}

impl InterpMap {
    pub fn new(in_t: usize, out_t: usize, fwd: Vec<Vec<(usize, f64)>>) -> Self {
        let mut rev = vec![Vec::new(); in_t];
        for (to, row) in fwd.iter().enumerate() {
            for &(ti, w) in row {
                rev[ti].push((to, w));
            }
        }
        Self { in_t, out_t, fwd, rev }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(TensorId, TensorId),
    Sub(TensorId, TensorId),
    Mul(TensorId, TensorId),
    ScalarMul(TensorId, f64),
    AddScalar(TensorId),
    Matmul(TensorId, TensorId),
    Transpose(TensorId),
    Reshape(TensorId),
    Concat { axis: usize, parts: Vec<TensorId> },
    Slice { a: TensorId, axis: usize, start: usize },
    SumAxis { a: TensorId, axis: usize },
    BroadcastAxis { a: TensorId, axis: usize },
    Softmax(TensorId),
    Exp(TensorId),
    Log(TensorId),
    Sqrt(TensorId),
    Square(TensorId),
    Recip(TensorId),
    Sigmoid(TensorId),
    LeakyRelu(TensorId, f64),
    Elu(TensorId),
    MaxPool1d { a: TensorId, argmax: Arc<Vec<usize>> },
    /// Gather rows along the time axis. One index list per batch element
    /// (or a single shared list).
    GatherRows { a: TensorId, idx: Arc<Vec<Vec<usize>>> },
    /// Adjoint of `GatherRows`: rows of `a` are added into a zero tensor at
    /// the indexed time positions.
    ScatterRows { a: TensorId, idx: Arc<Vec<Vec<usize>>> },
    /// out[i] = a[idx[i]] over flat indices.
    ElemGather { a: TensorId, idx: Arc<Vec<usize>> },
    /// out[idx[i]] += a[i] over flat indices.
    ElemScatter { a: TensorId, idx: Arc<Vec<usize>> },
    PixelShuffle(TensorId),
    PixelUnshuffle(TensorId),
    /// (x0, x1) pairs on the last axis become (-x1, x0).
    SwapNegatePairs(TensorId),
    InterpRows { a: TensorId, map: Arc<InterpMap>, reverse: bool },
}

struct Node {
    shape: Vec<usize>,
    data: Vec<f64>,
    requires_grad: bool,
    op: Op,
}

/// Append-only record of tensor operations in topological order.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn check_shape(shape: &[usize]) -> Result<()> {
    if shape.is_empty() || shape.len() > 3 || shape.iter().any(|&e| e == 0) {
        return Err(TensorError::InvalidShape { detail: format!("{shape:?}") });
    }
    Ok(())
}

fn mismatch(op: &'static str, detail: String) -> TensorError {
    TensorError::ShapeMismatch { op, detail }
}

/// C[m,n] += A[m,k] * B[k,n] on flat row-major slices.
fn matmul_acc(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av != 0.0 {
                let brow = &b[p * n..(p + 1) * n];
                for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                    *o += av * bv;
                }
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        &self.nodes[id.0].shape
    }

    pub fn data(&self, id: TensorId) -> &[f64] {
        &self.nodes[id.0].data
    }

    pub fn requires_grad(&self, id: TensorId) -> bool {
        self.nodes[id.0].requires_grad
    }

    pub fn numel(&self, id: TensorId) -> usize {
        self.nodes[id.0].data.len()
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<f64>, requires_grad: bool, op: Op) -> TensorId {
        debug_assert_eq!(numel(&shape), data.len());
        let id = TensorId(self.nodes.len());
        self.nodes.push(Node { shape, data, requires_grad, op });
        id
    }

    fn requires_any(&self, ids: &[TensorId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    // ── leaves ──────────────────────────────────────────────────────────

    pub fn leaf(&mut self, shape: &[usize], data: Vec<f64>, requires_grad: bool) -> Result<TensorId> {
        check_shape(shape)?;
        if numel(shape) != data.len() {
            return Err(mismatch("leaf", format!("shape {shape:?} vs {} values", data.len())));
        }
        Ok(self.push(shape.to_vec(), data, requires_grad, Op::Leaf))
    }

    pub fn constant(&mut self, shape: &[usize], data: Vec<f64>) -> Result<TensorId> {
        self.leaf(shape, data, false)
    }

    pub fn scalar(&mut self, v: f64) -> TensorId {
        self.push(vec![1], vec![v], false, Op::Leaf)
    }

    pub fn zeros(&mut self, shape: &[usize]) -> Result<TensorId> {
        check_shape(shape)?;
        Ok(self.push(shape.to_vec(), vec![0.0; numel(shape)], false, Op::Leaf))
    }

    /// Copy of the value as a fresh constant leaf (cuts the gradient path).
    pub fn detach(&mut self, a: TensorId) -> TensorId {
        let shape = self.nodes[a.0].shape.clone();
        let data = self.nodes[a.0].data.clone();
        self.push(shape, data, false, Op::Leaf)
    }

    // ── elementwise binary ──────────────────────────────────────────────

    fn same_shape(&self, op: &'static str, a: TensorId, b: TensorId) -> Result<()> {
        if self.nodes[a.0].shape != self.nodes[b.0].shape {
            return Err(mismatch(
                op,
                format!("{:?} vs {:?}", self.nodes[a.0].shape, self.nodes[b.0].shape),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.same_shape("add", a, b)?;
        let data: Vec<f64> = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(x, y)| x + y)
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.requires_any(&[a, b]);
        Ok(self.push(shape, data, rg, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.same_shape("sub", a, b)?;
        let data: Vec<f64> = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(x, y)| x - y)
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.requires_any(&[a, b]);
        Ok(self.push(shape, data, rg, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.same_shape("mul", a, b)?;
        let data: Vec<f64> = self.nodes[a.0]
            .data
            .iter()
            .zip(&self.nodes[b.0].data)
            .map(|(x, y)| x * y)
            .collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.requires_any(&[a, b]);
        Ok(self.push(shape, data, rg, Op::Mul(a, b)))
    }

    pub fn scalar_mul(&mut self, a: TensorId, c: f64) -> TensorId {
        let data: Vec<f64> = self.nodes[a.0].data.iter().map(|x| x * c).collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.nodes[a.0].requires_grad;
        self.push(shape, data, rg, Op::ScalarMul(a, c))
    }

    pub fn add_scalar(&mut self, a: TensorId, c: f64) -> TensorId {
        let data: Vec<f64> = self.nodes[a.0].data.iter().map(|x| x + c).collect();
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.nodes[a.0].requires_grad;
        self.push(shape, data, rg, Op::AddScalar(a))
    }

    // ── matmul / transpose / reshape ────────────────────────────────────

    /// Matrix product. Accepts `[m,k]x[k,n]`, batched `[b,m,k]x[b,k,n]`, and
    /// a rank-2 right operand broadcast over the batch: `[b,m,k]x[k,n]`.
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (ash, bsh) = (self.nodes[a.0].shape.clone(), self.nodes[b.0].shape.clone());
        let (shape, batches, m, k, n) = match (ash.as_slice(), bsh.as_slice()) {
            ([m, k], [k2, n]) if k == k2 => (vec![*m, *n], 1usize, *m, *k, *n),
            ([bb, m, k], [k2, n]) if k == k2 => (vec![*bb, *m, *n], *bb, *m, *k, *n),
            ([bb, m, k], [b2, k2, n]) if k == k2 && bb == b2 => (vec![*bb, *m, *n], *bb, *m, *k, *n),
            _ => return Err(mismatch("matmul", format!("{ash:?} x {bsh:?}"))),
        };
        let rhs_batched = bsh.len() == 3;
        let mut data = vec![0.0; numel(&shape)];
        for bi in 0..batches {
            let ai = &self.nodes[a.0].data[bi * m * k..(bi + 1) * m * k];
            let bi_off = if rhs_batched { bi * k * n } else { 0 };
            let bd = &self.nodes[b.0].data[bi_off..bi_off + k * n];
            matmul_acc(ai, bd, &mut data[bi * m * n..(bi + 1) * m * n], m, k, n);
        }
        let rg = self.requires_any(&[a, b]);
        Ok(self.push(shape, data, rg, Op::Matmul(a, b)))
    }

    /// Swap the last two axes (rank 2 or 3).
    pub fn transpose(&mut self, a: TensorId) -> Result<TensorId> {
        let ash = self.nodes[a.0].shape.clone();
        let (batches, m, n) = match ash.as_slice() {
            [m, n] => (1usize, *m, *n),
            [b, m, n] => (*b, *m, *n),
            _ => return Err(mismatch("transpose", format!("rank-1 tensor {ash:?}"))),
        };
        let mut shape = ash.clone();
        let rank = shape.len();
        shape.swap(rank - 2, rank - 1);
        let src = &self.nodes[a.0].data;
        let mut data = vec![0.0; src.len()];
        for b in 0..batches {
            let off = b * m * n;
            for i in 0..m {
                for j in 0..n {
                    data[off + j * m + i] = src[off + i * n + j];
                }
            }
        }
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(shape, data, rg, Op::Transpose(a)))
    }

    pub fn reshape(&mut self, a: TensorId, shape: &[usize]) -> Result<TensorId> {
        check_shape(shape)?;
        if numel(shape) != self.nodes[a.0].data.len() {
            return Err(mismatch(
                "reshape",
                format!("{:?} -> {:?}", self.nodes[a.0].shape, shape),
            ));
        }
        let data = self.nodes[a.0].data.clone();
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(shape.to_vec(), data, rg, Op::Reshape(a)))
    }

    // ── concat / slice ──────────────────────────────────────────────────

    pub fn concat(&mut self, parts: &[TensorId], axis: usize) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(mismatch("concat", "no inputs".into()));
        }
        let rank = self.nodes[parts[0].0].shape.len();
        if axis >= rank {
            return Err(mismatch("concat", format!("axis {axis} for rank {rank}")));
        }
        let mut shape = self.nodes[parts[0].0].shape.clone();
        shape[axis] = 0;
        for &p in parts {
            let psh = &self.nodes[p.0].shape;
            if psh.len() != rank {
                return Err(mismatch("concat", format!("rank {rank} vs {}", psh.len())));
            }
            for (ax, (&got, want)) in psh.iter().zip(shape.iter_mut()).enumerate() {
                if ax == axis {
                    *want += got;
                } else if got != *want {
                    return Err(mismatch("concat", format!("axis {ax}: {got} vs {want}")));
                }
            }
        }
        // outer = product of axes before `axis`, inner = product after.
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(numel(&shape));
        for o in 0..outer {
            for &p in parts {
                let ext = self.nodes[p.0].shape[axis];
                let chunk = ext * inner;
                data.extend_from_slice(&self.nodes[p.0].data[o * chunk..(o + 1) * chunk]);
            }
        }
        let rg = self.requires_any(parts);
        Ok(self.push(shape, data, rg, Op::Concat { axis, parts: parts.to_vec() }))
    }

    pub fn slice(&mut self, a: TensorId, axis: usize, start: usize, len: usize) -> Result<TensorId> {
        let ash = self.nodes[a.0].shape.clone();
        if axis >= ash.len() || start + len > ash[axis] || len == 0 {
            return Err(mismatch(
                "slice",
                format!("axis {axis} [{start}..{}) of {ash:?}", start + len),
            ));
        }
        let mut shape = ash.clone();
        shape[axis] = len;
        let outer: usize = ash[..axis].iter().product();
        let inner: usize = ash[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(numel(&shape));
        for o in 0..outer {
            let base = (o * ash[axis] + start) * inner;
            data.extend_from_slice(&self.nodes[a.0].data[base..base + len * inner]);
        }
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(shape, data, rg, Op::Slice { a, axis, start }))
    }

    // ── reductions / broadcasts ─────────────────────────────────────────

    /// Sum along `axis`, keeping that axis with extent 1.
    pub fn sum_axis(&mut self, a: TensorId, axis: usize) -> Result<TensorId> {
        let ash = self.nodes[a.0].shape.clone();
        if axis >= ash.len() {
            return Err(mismatch("sum_axis", format!("axis {axis} for {ash:?}")));
        }
        let mut shape = ash.clone();
        shape[axis] = 1;
        let outer: usize = ash[..axis].iter().product();
        let inner: usize = ash[axis + 1..].iter().product();
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for t in 0..ash[axis] {
                let base = (o * ash[axis] + t) * inner;
                let dst = &mut data[o * inner..(o + 1) * inner];
                for (d, &s) in dst.iter_mut().zip(&self.nodes[a.0].data[base..base + inner]) {
                    *d += s;
                }
            }
        }
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(shape, data, rg, Op::SumAxis { a, axis }))
    }

    /// Repeat an extent-1 axis `n` times.
    pub fn broadcast_axis(&mut self, a: TensorId, axis: usize, n: usize) -> Result<TensorId> {
        let ash = self.nodes[a.0].shape.clone();
        if axis >= ash.len() || ash[axis] != 1 || n == 0 {
            return Err(mismatch("broadcast_axis", format!("axis {axis} x{n} of {ash:?}")));
        }
        let mut shape = ash.clone();
        shape[axis] = n;
        let outer: usize = ash[..axis].iter().product();
        let inner: usize = ash[axis + 1..].iter().product();
        let mut data = Vec::with_capacity(outer * n * inner);
        for o in 0..outer {
            let src = &self.nodes[a.0].data[o * inner..(o + 1) * inner];
            for _ in 0..n {
                data.extend_from_slice(src);
            }
        }
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(shape, data, rg, Op::BroadcastAxis { a, axis }))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum_all(&mut self, a: TensorId) -> Result<TensorId> {
        let mut cur = a;
        for axis in 0..self.nodes[a.0].shape.len() {
            cur = self.sum_axis(cur, axis)?;
        }
        self.reshape(cur, &[1])
    }

    /// Mean of all elements, as a scalar.
    pub fn mean_all(&mut self, a: TensorId) -> Result<TensorId> {
        let n = self.nodes[a.0].data.len() as f64;
        let s = self.sum_all(a)?;
        Ok(self.scalar_mul(s, 1.0 / n))
    }

    /// Mean along `axis`, keeping that axis with extent 1.
    pub fn mean_axis(&mut self, a: TensorId, axis: usize) -> Result<TensorId> {
        let n = self.nodes[a.0].shape[axis] as f64;
        let s = self.sum_axis(a, axis)?;
        Ok(self.scalar_mul(s, 1.0 / n))
    }

    /// Expand a `[d]` (or `[1,d]`/`[1,1,d]`) vector across the leading axes
    /// of `a`'s shape.
    fn broadcast_vec_to(&mut self, v: TensorId, ash: &[usize], op: &'static str) -> Result<TensorId> {
        let d = *ash.last().unwrap();
        if self.nodes[v.0].data.len() != d {
            return Err(mismatch(op, format!("vector {:?} vs last axis {d}", self.nodes[v.0].shape)));
        }
        let mut shaped = v;
        let target: Vec<usize> = std::iter::repeat(1).take(ash.len() - 1).chain([d]).collect();
        if self.nodes[shaped.0].shape != target {
            shaped = self.reshape(shaped, &target)?;
        }
        for axis in (0..ash.len() - 1).rev() {
            shaped = self.broadcast_axis(shaped, axis, ash[axis])?;
        }
        Ok(shaped)
    }

    /// Add a bias of shape `[d]` to every trailing-axis row of `a`.
    pub fn broadcast_add(&mut self, a: TensorId, bias: TensorId) -> Result<TensorId> {
        let ash = self.nodes[a.0].shape.clone();
        let shaped = self.broadcast_vec_to(bias, &ash, "broadcast_add")?;
        self.add(a, shaped)
    }

    /// Multiply every trailing-axis row of `a` by a `[d]` vector.
    pub fn broadcast_mul(&mut self, a: TensorId, v: TensorId) -> Result<TensorId> {
        let ash = self.nodes[a.0].shape.clone();
        let shaped = self.broadcast_vec_to(v, &ash, "broadcast_mul")?;
        self.mul(a, shaped)
    }

    // ── elementwise unary ───────────────────────────────────────────────

    fn unary(&mut self, a: TensorId, data: Vec<f64>, op: Op) -> TensorId {
        let shape = self.nodes[a.0].shape.clone();
        let rg = self.nodes[a.0].requires_grad;
        self.push(shape, data, rg, op)
    }

    pub fn exp(&mut self, a: TensorId) -> TensorId {
        let data = self.nodes[a.0].data.iter().map(|x| x.exp()).collect();
        self.unary(a, data, Op::Exp(a))
    }

    pub fn log(&mut self, a: TensorId) -> Result<TensorId> {
        if self.nodes[a.0].data.iter().any(|&x| x <= 0.0) {
            return Err(TensorError::Domain { op: "log", detail: "non-positive input".into() });
        }
        let data = self.nodes[a.0].data.iter().map(|x| x.ln()).collect();
        Ok(self.unary(a, data, Op::Log(a)))
    }

    pub fn sqrt(&mut self, a: TensorId) -> Result<TensorId> {
        if self.nodes[a.0].data.iter().any(|&x| x < 0.0) {
            return Err(TensorError::Domain { op: "sqrt", detail: "negative input".into() });
        }
        let data = self.nodes[a.0].data.iter().map(|x| x.sqrt()).collect();
        Ok(self.unary(a, data, Op::Sqrt(a)))
    }

    pub fn square(&mut self, a: TensorId) -> TensorId {
        let data = self.nodes[a.0].data.iter().map(|x| x * x).collect();
        self.unary(a, data, Op::Square(a))
    }

    pub fn recip(&mut self, a: TensorId) -> Result<TensorId> {
        if self.nodes[a.0].data.iter().any(|&x| x == 0.0) {
            return Err(TensorError::Domain { op: "recip", detail: "zero input".into() });
        }
        let data = self.nodes[a.0].data.iter().map(|x| 1.0 / x).collect();
        Ok(self.unary(a, data, Op::Recip(a)))
    }

    pub fn sigmoid(&mut self, a: TensorId) -> TensorId {
        let data = self.nodes[a.0].data.iter().map(|x| 1.0 / (1.0 + (-x).exp())).collect();
        self.unary(a, data, Op::Sigmoid(a))
    }

    pub fn leaky_relu(&mut self, a: TensorId, slope: f64) -> TensorId {
        let data = self.nodes[a.0]
            .data
            .iter()
            .map(|&x| if x >= 0.0 { x } else { slope * x })
            .collect();
        self.unary(a, data, Op::LeakyRelu(a, slope))
    }

    pub fn elu(&mut self, a: TensorId) -> TensorId {
        let data = self.nodes[a.0]
            .data
            .iter()
            .map(|&x| if x > 0.0 { x } else { x.exp() - 1.0 })
            .collect();
        self.unary(a, data, Op::Elu(a))
    }

    /// Numerically stable softmax over the last axis.
    pub fn softmax(&mut self, a: TensorId) -> TensorId {
        let shape = self.nodes[a.0].shape.clone();
        let d = *shape.last().unwrap();
        let rows = self.nodes[a.0].data.len() / d;
        let mut data = vec![0.0; self.nodes[a.0].data.len()];
        for r in 0..rows {
            let src = &self.nodes[a.0].data[r * d..(r + 1) * d];
            let max = src.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let dst = &mut data[r * d..(r + 1) * d];
            let mut sum = 0.0;
            for (o, &x) in dst.iter_mut().zip(src) {
                *o = (x - max).exp();
                sum += *o;
            }
            for o in dst.iter_mut() {
                *o /= sum;
            }
        }
        self.unary(a, data, Op::Softmax(a))
    }

    // ── structured ops ──────────────────────────────────────────────────

    /// Max pooling along the time axis of a `[B,T,D]` tensor. Padding acts as
    /// negative infinity; ties route to the earliest index.
    pub fn max_pool1d(&mut self, a: TensorId, width: usize, stride: usize, pad: usize) -> Result<TensorId> {
        let ash = self.nodes[a.0].shape.clone();
        let [b, t, d] = ash.as_slice() else {
            return Err(mismatch("max_pool1d", format!("need rank 3, got {ash:?}")));
        };
        let (b, t, d) = (*b, *t, *d);
        if width == 0 || stride == 0 || t + 2 * pad < width {
            return Err(mismatch("max_pool1d", format!("width {width} stride {stride} pad {pad} on T={t}")));
        }
        let t_out = (t + 2 * pad - width) / stride + 1;
        let mut data = vec![0.0; b * t_out * d];
        let mut argmax = vec![0usize; b * t_out * d];
        let src = &self.nodes[a.0].data;
        for bi in 0..b {
            for to in 0..t_out {
                for c in 0..d {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = usize::MAX;
                    for w in 0..width {
                        let ti = (to * stride + w) as isize - pad as isize;
                        if ti < 0 || ti >= t as isize {
                            continue;
                        }
                        let v = src[(bi * t + ti as usize) * d + c];
                        if v > best {
                            best = v;
                            best_idx = (bi * t + ti as usize) * d + c;
                        }
                    }
                    data[(bi * t_out + to) * d + c] = best;
                    argmax[(bi * t_out + to) * d + c] = best_idx;
                }
            }
        }
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(vec![b, t_out, d], data, rg, Op::MaxPool1d { a, argmax: Arc::new(argmax) }))
    }

    /// Gather rows along the time axis of a `[B,T,D]` tensor. `idx` holds one
    /// index list per batch element, or a single list shared by all.
    pub fn gather_rows(&mut self, a: TensorId, idx: Arc<Vec<Vec<usize>>>) -> Result<TensorId> {
        let ash = self.nodes[a.0].shape.clone();
        let [b, t, d] = ash.as_slice() else {
            return Err(mismatch("gather_rows", format!("need rank 3, got {ash:?}")));
        };
        let (b, t, d) = (*b, *t, *d);
        if idx.len() != 1 && idx.len() != b {
            return Err(mismatch("gather_rows", format!("{} index lists for batch {b}", idx.len())));
        }
        let rows = idx[0].len();
        if idx.iter().any(|l| l.len() != rows) || idx.iter().flatten().any(|&i| i >= t) {
            return Err(mismatch("gather_rows", "ragged or out-of-range indices".into()));
        }
        let mut data = Vec::with_capacity(b * rows * d);
        for bi in 0..b {
            let list = &idx[if idx.len() == 1 { 0 } else { bi }];
            for &ti in list {
                let base = (bi * t + ti) * d;
                data.extend_from_slice(&self.nodes[a.0].data[base..base + d]);
            }
        }
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(vec![b, rows, d], data, rg, Op::GatherRows { a, idx }))
    }

    /// Add the rows of `a` into a `[B,out_t,D]` zero tensor at the indexed
    /// time positions (adjoint of `gather_rows`).
    pub fn scatter_rows(&mut self, a: TensorId, idx: Arc<Vec<Vec<usize>>>, out_t: usize) -> Result<TensorId> {
        let ash = self.nodes[a.0].shape.clone();
        let [b, rows, d] = ash.as_slice() else {
            return Err(mismatch("scatter_rows", format!("need rank 3, got {ash:?}")));
        };
        let (b, rows, d) = (*b, *rows, *d);
        if idx.len() != 1 && idx.len() != b {
            return Err(mismatch("scatter_rows", format!("{} index lists for batch {b}", idx.len())));
        }
        if idx.iter().any(|l| l.len() != rows) || idx.iter().flatten().any(|&i| i >= out_t) {
            return Err(mismatch("scatter_rows", "ragged or out-of-range indices".into()));
        }
        let mut data = vec![0.0; b * out_t * d];
        for bi in 0..b {
            let list = &idx[if idx.len() == 1 { 0 } else { bi }];
            for (r, &ti) in list.iter().enumerate() {
                let src = &self.nodes[a.0].data[(bi * rows + r) * d..(bi * rows + r + 1) * d];
                let dst = &mut data[(bi * out_t + ti) * d..(bi * out_t + ti + 1) * d];
                for (o, &s) in dst.iter_mut().zip(src) {
                    *o += s;
                }
            }
        }
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(vec![b, out_t, d], data, rg, Op::ScatterRows { a, idx }))
    }

    fn elem_gather(&mut self, a: TensorId, idx: Arc<Vec<usize>>, shape: Vec<usize>) -> TensorId {
        let data: Vec<f64> = idx.iter().map(|&i| self.nodes[a.0].data[i]).collect();
        let rg = self.nodes[a.0].requires_grad;
        self.push(shape, data, rg, Op::ElemGather { a, idx })
    }

    fn elem_scatter(&mut self, a: TensorId, idx: Arc<Vec<usize>>, shape: Vec<usize>) -> TensorId {
        let mut data = vec![0.0; numel(&shape)];
        for (i, &dst) in idx.iter().enumerate() {
            data[dst] += self.nodes[a.0].data[i];
        }
        let rg = self.nodes[a.0].requires_grad;
        self.push(shape, data, rg, Op::ElemScatter { a, idx })
    }

    /// `[B,T,D]` -> `[B,2T,D/2]` with `out[b,2t+i,d] = in[b,t,2d+i]`.
    pub fn pixel_shuffle(&mut self, a: TensorId) -> Result<TensorId> {
        let ash = self.nodes[a.0].shape.clone();
        let [b, t, d] = ash.as_slice() else {
            return Err(mismatch("pixel_shuffle", format!("need rank 3, got {ash:?}")));
        };
        let (b, t, d) = (*b, *t, *d);
        if d % 2 != 0 {
            return Err(mismatch("pixel_shuffle", format!("odd depth {d}")));
        }
        let dh = d / 2;
        let src = &self.nodes[a.0].data;
        let mut data = vec![0.0; src.len()];
        for bi in 0..b {
            for ti in 0..t {
                for c in 0..dh {
                    for i in 0..2 {
                        data[(bi * 2 * t + 2 * ti + i) * dh + c] = src[(bi * t + ti) * d + 2 * c + i];
                    }
                }
            }
        }
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(vec![b, 2 * t, dh], data, rg, Op::PixelShuffle(a)))
    }

    /// Exact inverse of `pixel_shuffle`: `[B,T,D]` -> `[B,T/2,2D]`.
    pub fn pixel_unshuffle(&mut self, a: TensorId) -> Result<TensorId> {
        let ash = self.nodes[a.0].shape.clone();
        let [b, t, d] = ash.as_slice() else {
            return Err(mismatch("pixel_unshuffle", format!("need rank 3, got {ash:?}")));
        };
        let (b, t, d) = (*b, *t, *d);
        if t % 2 != 0 {
            return Err(mismatch("pixel_unshuffle", format!("odd time extent {t}")));
        }
        let th = t / 2;
        let src = &self.nodes[a.0].data;
        let mut data = vec![0.0; src.len()];
        for bi in 0..b {
            for ti in 0..th {
                for c in 0..d {
                    for i in 0..2 {
                        data[(bi * th + ti) * 2 * d + 2 * c + i] = src[(bi * t + 2 * ti + i) * d + c];
                    }
                }
            }
        }
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(vec![b, th, 2 * d], data, rg, Op::PixelUnshuffle(a)))
    }

    /// Last-axis pairs (x0, x1) become (-x1, x0); used to express rotations.
    pub fn swap_negate_pairs(&mut self, a: TensorId) -> Result<TensorId> {
        let ash = self.nodes[a.0].shape.clone();
        let d = *ash.last().unwrap();
        if d % 2 != 0 {
            return Err(mismatch("swap_negate_pairs", format!("odd last axis {d}")));
        }
        let src = &self.nodes[a.0].data;
        let mut data = vec![0.0; src.len()];
        for r in 0..src.len() / d {
            for p in 0..d / 2 {
                data[r * d + 2 * p] = -src[r * d + 2 * p + 1];
                data[r * d + 2 * p + 1] = src[r * d + 2 * p];
            }
        }
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(ash, data, rg, Op::SwapNegatePairs(a)))
    }

    /// Apply a sparse row-mixing map along the time axis of `[B,T,D]`.
    pub fn interp_rows(&mut self, a: TensorId, map: Arc<InterpMap>) -> Result<TensorId> {
        self.interp_rows_dir(a, map, false)
    }

    fn interp_rows_dir(&mut self, a: TensorId, map: Arc<InterpMap>, reverse: bool) -> Result<TensorId> {
        let ash = self.nodes[a.0].shape.clone();
        let [b, t, d] = ash.as_slice() else {
            return Err(mismatch("interp_rows", format!("need rank 3, got {ash:?}")));
        };
        let (b, t, d) = (*b, *t, *d);
        let (in_t, out_t, table) = if reverse {
            (map.out_t, map.in_t, &map.rev)
        } else {
            (map.in_t, map.out_t, &map.fwd)
        };
        if t != in_t {
            return Err(mismatch("interp_rows", format!("T {t} vs map input {in_t}")));
        }
        let src = &self.nodes[a.0].data;
        let mut data = vec![0.0; b * out_t * d];
        for bi in 0..b {
            for (to, row) in table.iter().enumerate() {
                let dst_base = (bi * out_t + to) * d;
                for &(ti, w) in row {
                    let src_base = (bi * t + ti) * d;
                    for c in 0..d {
                        data[dst_base + c] += w * src[src_base + c];
                    }
                }
            }
        }
        let rg = self.nodes[a.0].requires_grad;
        Ok(self.push(vec![b, out_t, d], data, rg, Op::InterpRows { a, map, reverse }))
    }

    /// Depthwise 1-D convolution along time: kernel `[width, D]`, zero padding.
    pub fn conv1d_depthwise(
        &mut self,
        a: TensorId,
        kernel: TensorId,
        stride: usize,
        pad: usize,
    ) -> Result<TensorId> {
        let ash = self.nodes[a.0].shape.clone();
        let [b, t, d] = ash.as_slice() else {
            return Err(mismatch("conv1d", format!("need rank 3, got {ash:?}")));
        };
        let (b, t, d) = (*b, *t, *d);
        let ksh = self.nodes[kernel.0].shape.clone();
        let [width, kd] = ksh.as_slice() else {
            return Err(mismatch("conv1d", format!("kernel must be [width,D], got {ksh:?}")));
        };
        let (width, kd) = (*width, *kd);
        if kd != d || width == 0 || stride == 0 || t + 2 * pad < width {
            return Err(mismatch("conv1d", format!("kernel {ksh:?} on {ash:?} stride {stride} pad {pad}")));
        }
        let t_full = t + 2 * pad - width + 1;
        let mut x = a;
        if pad > 0 {
            let z = self.zeros(&[b, pad, d])?;
            x = self.concat(&[z, a, z], 1)?;
        }
        let k3 = self.reshape(kernel, &[1, width, d])?;
        let mut acc: Option<TensorId> = None;
        for k in 0..width {
            let xs = self.slice(x, 1, k, t_full)?;
            let kk = self.slice(k3, 1, k, 1)?;
            let kt = self.broadcast_axis(kk, 1, t_full)?;
            let kb = self.broadcast_axis(kt, 0, b)?;
            let term = self.mul(xs, kb)?;
            acc = Some(match acc {
                Some(s) => self.add(s, term)?,
                None => term,
            });
        }
        let mut out = acc.unwrap();
        if stride > 1 {
            let idx: Vec<usize> = (0..t_full).step_by(stride).collect();
            out = self.gather_rows(out, Arc::new(vec![idx]))?;
        }
        Ok(out)
    }
}
