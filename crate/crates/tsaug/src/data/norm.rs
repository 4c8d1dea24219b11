//! Per-subset z-score normalization. Each subset owns its parameters so no
//! statistics leak across the split.

use serde::{Deserialize, Serialize};

use crate::data::DataError;
use crate::window::Window;

/// Per-channel mean and standard deviation fitted on one subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormParams {
    pub fn identity(d: usize) -> Self {
        Self { mean: vec![0.0; d], std: vec![1.0; d] }
    }

    pub fn d(&self) -> usize {
        self.mean.len()
    }
}

/// Population mean/std per channel over every sample of every window in the
/// subset.
pub fn fit_norm<'a>(windows: impl IntoIterator<Item = &'a Window>) -> Result<NormParams, DataError> {
    let mut iter = windows.into_iter().peekable();
    let Some(first) = iter.peek() else {
        return Err(DataError::BadSpec { detail: "empty subset".into() });
    };
    let d = first.d;
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    let mut count = 0usize;
    for w in iter {
        debug_assert_eq!(w.d, d);
        for t in 0..w.t {
            for c in 0..d {
                let v = w.get(t, c);
                sum[c] += v;
                sum_sq[c] += v * v;
            }
        }
        count += w.t;
    }
    let n = count as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std: Vec<f64> = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| (sq / n - m * m).max(0.0).sqrt())
        .collect();
    if std.iter().any(|&s| s <= 0.0) {
        return Err(DataError::ZeroVariance);
    }
    Ok(NormParams { mean, std })
}

pub fn apply_norm(window: &Window, params: &NormParams) -> Window {
    let mut out = window.clone();
    for t in 0..out.t {
        for c in 0..out.d {
            out.data[t * out.d + c] = (window.get(t, c) - params.mean[c]) / params.std[c];
        }
    }
    out
}

pub fn invert_norm(window: &Window, params: &NormParams) -> Window {
    let mut out = window.clone();
    for t in 0..out.t {
        for c in 0..out.d {
            out.data[t * out.d + c] = window.get(t, c) * params.std[c] + params.mean[c];
        }
    }
    out
}
