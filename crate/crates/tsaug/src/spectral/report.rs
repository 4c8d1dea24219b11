//! Segment- and set-level spectral distances, and their export formats.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::spectral::npsd::{mean_npsd, npsd_of, NpsdSet, Result, SpectralError};
use crate::spectral::wasserstein::wasserstein2_1d;
use crate::window::Window;

/// Average over channels of the spectrum distance between two equal-shape
/// segments. Deliberately a mean of one-dimensional distances, not a
/// multi-dimensional transport problem.
pub fn segment_distance(a: &Window, b: &Window) -> Result<f64> {
    if a.t != b.t || a.d != b.d {
        return Err(SpectralError::ShapeMismatch {
            detail: format!("{}x{} vs {}x{}", a.t, a.d, b.t, b.d),
        });
    }
    let mut total = 0.0;
    for c in 0..a.d {
        let na = npsd_of(&a.channel(c))?;
        let nb = npsd_of(&b.channel(c))?;
        total += wasserstein2_1d(&na, &nb)?;
    }
    Ok(total / a.d as f64)
}

/// Mean distance from the members to their mean spectrum; the spread
/// analogue of a standard deviation.
pub fn standard_distance(set: &NpsdSet) -> Result<f64> {
    let mean = mean_npsd(set);
    let mut total = 0.0;
    for m in set.members() {
        total += wasserstein2_1d(m, &mean)?;
    }
    Ok(total / set.n() as f64)
}

/// Set-vs-set comparison: intra-set spreads, the distance between the two
/// mean spectra, the mean pairwise cross distance, and both means for
/// qualitative inspection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SetReport {
    pub intra_a: f64,
    pub intra_b: f64,
    pub inter: f64,
    pub pairwise_mean: f64,
    pub grid: Vec<f64>,
    pub mean_a: Vec<f64>,
    pub mean_b: Vec<f64>,
}

pub fn set_report(set_a: &NpsdSet, set_b: &NpsdSet) -> Result<SetReport> {
    if set_a.t_len() != set_b.t_len() {
        return Err(SpectralError::GridMismatch { a: set_a.t_len(), b: set_b.t_len() });
    }
    let mean_a = mean_npsd(set_a);
    let mean_b = mean_npsd(set_b);
    let mut pairwise = 0.0;
    for ma in set_a.members() {
        for mb in set_b.members() {
            pairwise += wasserstein2_1d(ma, mb)?;
        }
    }
    pairwise /= (set_a.n() * set_b.n()) as f64;
    Ok(SetReport {
        intra_a: standard_distance(set_a)?,
        intra_b: standard_distance(set_b)?,
        inter: wasserstein2_1d(&mean_a, &mean_b)?,
        pairwise_mean: pairwise,
        grid: mean_a.freqs(),
        mean_a: mean_a.mass,
        mean_b: mean_b.mass,
    })
}

/// Spectra as CSV: header `freq,<name>,...`, one row per frequency bin.
pub fn write_spectra_csv<W: Write>(
    out: &mut W,
    grid: &[f64],
    columns: &[(String, Vec<f64>)],
) -> std::io::Result<()> {
    write!(out, "freq")?;
    for (name, _) in columns {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for (k, f) in grid.iter().enumerate() {
        write!(out, "{f}")?;
        for (_, mass) in columns {
            write!(out, ",{}", mass[k])?;
        }
        writeln!(out)?;
    }
    Ok(())
}
