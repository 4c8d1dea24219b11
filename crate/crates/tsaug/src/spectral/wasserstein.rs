//! Exact 1-D Wasserstein-2 distance between two spectra on a shared grid,
//! computed by merging the cumulative-mass event lists (no sampling).

use crate::spectral::npsd::{Npsd, Result, SpectralError};

/// `W2(a, b) = sqrt( integral_0^1 (Qa(u) - Qb(u))^2 du )` where Q are the
/// piecewise-constant quantile functions of the two discrete distributions.
/// The integral is a finite sum over merged CDF breakpoints, so the result is
/// exact up to rounding and symmetric bit-for-bit.
pub fn wasserstein2_1d(a: &Npsd, b: &Npsd) -> Result<f64> {
    if a.t_len() != b.t_len() || a.mass.len() != b.mass.len() {
        return Err(SpectralError::GridMismatch { a: a.t_len(), b: b.t_len() });
    }
    let n = a.mass.len();
    let mut ia = 0;
    let mut ib = 0;
    let mut cum_a = a.mass[0];
    let mut cum_b = b.mass[0];
    let mut u = 0.0;
    let mut acc = 0.0;
    loop {
        let next = cum_a.min(cum_b);
        if next > u {
            let dq = a.freq(ia) - b.freq(ib);
            acc += dq * dq * (next - u);
            u = next;
        }
        let step_a = cum_a <= cum_b && ia + 1 < n;
        let step_b = cum_b <= cum_a && ib + 1 < n;
        if !step_a && !step_b {
            break;
        }
        if step_a {
            ia += 1;
            cum_a += a.mass[ia];
        }
        if step_b {
            ib += 1;
            cum_b += b.mass[ib];
        }
    }
    Ok(acc.sqrt())
}
