//! Central-difference verification of reverse-mode gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Result, Tape, TensorError, TensorId};

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Central-difference step h.
    pub step: f64,
    /// Pass threshold on the max relative error.
    pub tol: f64,
    /// Cap on checked coordinates per input; `None` checks every coordinate.
    /// Large inputs (full network losses) are sampled to keep runtime sane.
    pub max_coords_per_input: Option<usize>,
    /// Seed for coordinate sampling when capped.
    pub sample_seed: u64,
    /// A coordinate also passes when |analytic - numeric| <= abs_tol. The
    /// central difference carries an absolute error of ~h^2 f'''/6 plus
    /// round-off ~eps|f|/2h, so it cannot grade coordinates whose gradient
    /// is below that budget on a relative scale. Zero disables the slack
    /// (pure relative form).
    pub abs_tol: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { step: 1e-4, tol: 1e-4, max_coords_per_input: None, sample_seed: 0, abs_tol: 0.0 }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub pass: bool,
    pub coords_checked: usize,
    /// Worst coordinate: (input index, flat coordinate, analytic, numeric).
    pub worst: Option<(usize, usize, f64, f64)>,
}

/// Compare the reverse-mode gradient of a scalar function against central
/// differences `(f(x+h e_i) - f(x-h e_i)) / 2h`, element-wise, with relative
/// error denominator `max(|a|, |b|, 1e-8)`.
///
/// `f` must be deterministic: any internal randomness (sparse-attention
/// sampling, interpolation draws) has to be frozen inside the closure.
pub fn grad_check<F>(
    f: &F,
    inputs: &[(Vec<usize>, Vec<f64>)],
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[TensorId]) -> Result<TensorId>,
{
    // Analytic pass.
    let mut tape = Tape::new();
    let ids: Vec<TensorId> = inputs
        .iter()
        .map(|(shape, data)| tape.leaf(shape, data.clone(), true))
        .collect::<Result<_>>()?;
    let loss = f(&mut tape, &ids)?;
    if tape.numel(loss) != 1 {
        return Err(TensorError::NonScalarLoss { numel: tape.numel(loss) });
    }
    let gm = tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = ids.iter().map(|&id| gm.grad_vec(&tape, id)).collect();

    let eval = |data: &[Vec<f64>]| -> Result<f64> {
        let mut t = Tape::new();
        let ids: Vec<TensorId> = inputs
            .iter()
            .zip(data)
            .map(|((shape, _), d)| t.leaf(shape, d.clone(), true))
            .collect::<Result<_>>()?;
        let l = f(&mut t, &ids)?;
        Ok(t.data(l)[0])
    };

    let base: Vec<Vec<f64>> = inputs.iter().map(|(_, d)| d.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sample_seed);
    let mut max_rel_err: f64 = 0.0;
    let mut coords_checked = 0;
    let mut worst = None;

    for (pi, (_, data)) in inputs.iter().enumerate() {
        let coords: Vec<usize> = match cfg.max_coords_per_input {
            Some(cap) if data.len() > cap => {
                (0..cap).map(|_| rng.gen_range(0..data.len())).collect()
            }
            _ => (0..data.len()).collect(),
        };
        for ci in coords {
            let mut plus = base.clone();
            plus[pi][ci] += cfg.step;
            let mut minus = base.clone();
            minus[pi][ci] -= cfg.step;
            let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * cfg.step);
            let a = analytic[pi][ci];
            let rel = if (a - numeric).abs() <= cfg.abs_tol {
                0.0
            } else {
                (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8)
            };
            if rel > max_rel_err {
                max_rel_err = rel;
                worst = Some((pi, ci, a, numeric));
            }
            coords_checked += 1;
        }
    }

    Ok(GradCheckReport { max_rel_err, pass: max_rel_err <= cfg.tol, coords_checked, worst })
}
