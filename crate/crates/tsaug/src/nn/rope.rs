//! Rotary position embedding: query/key pairs are rotated by a
//! position-dependent angle so attention scores depend on relative offset.

use crate::tensor::{Result, Tape, TensorError, TensorId};

pub const ROPE_BASE: f64 = 10_000.0;

/// Rotate last-axis pairs `(2i, 2i+1)` of a `[B,T,d_head]` tensor by
/// `pos * base^(-2i/d_head)`. Applied to queries and keys only, never values.
pub fn rope_rotate(tape: &mut Tape, qk: TensorId, positions: &[usize]) -> Result<TensorId> {
    let shape = tape.shape(qk).to_vec();
    let [b, t, d] = shape.as_slice() else {
        return Err(TensorError::ShapeMismatch {
            op: "rope_rotate",
            detail: format!("need rank 3, got {shape:?}"),
        });
    };
    let (b, t, d) = (*b, *t, *d);
    if d % 2 != 0 {
        return Err(TensorError::ShapeMismatch {
            op: "rope_rotate",
            detail: format!("odd head dim {d}"),
        });
    }
    if positions.len() != t {
        return Err(TensorError::ShapeMismatch {
            op: "rope_rotate",
            detail: format!("{} positions for T={t}", positions.len()),
        });
    }
    let mut cos = vec![0.0; t * d];
    let mut sin = vec![0.0; t * d];
    for (ti, &pos) in positions.iter().enumerate() {
        for i in 0..d / 2 {
            let theta = pos as f64 * ROPE_BASE.powf(-2.0 * i as f64 / d as f64);
            cos[ti * d + 2 * i] = theta.cos();
            cos[ti * d + 2 * i + 1] = theta.cos();
            sin[ti * d + 2 * i] = theta.sin();
            sin[ti * d + 2 * i + 1] = theta.sin();
        }
    }
    let c = tape.constant(&[1, t, d], cos)?;
    let s = tape.constant(&[1, t, d], sin)?;
    let cb = tape.broadcast_axis(c, 0, b)?;
    let sb = tape.broadcast_axis(s, 0, b)?;
    // (x0, x1) -> (x0 cos - x1 sin, x1 cos + x0 sin)
    let xc = tape.mul(qk, cb)?;
    let swapped = tape.swap_negate_pairs(qk)?;
    let xs = tape.mul(swapped, sb)?;
    tape.add(xc, xs)
}
