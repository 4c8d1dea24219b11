//! Compound-sine artificial dataset with three difficulty classes. Classes
//! occupy pairwise disjoint ranges in every generation parameter so their
//! spectral supports are separable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::DataError;
use crate::window::{ConditionLabel, Window};

use super::record::{Provenance, WindowRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub fn index(self) -> usize {
        match self {
            Self::Easy => 0,
            Self::Medium => 1,
            Self::Hard => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Easy => "easy",
            Self::Medium => "medium",
            Self::Hard => "hard",
        }
    }
}

/// Stochastic generation ranges of one class. Frequencies are integer cycles
/// per window so every component lands exactly on a spectrum bin and class
/// supports stay disjoint; component count, amplitude and phase are drawn
/// uniformly from their ranges.
#[derive(Debug, Clone)]
pub struct ArtificialClassSpec {
    pub name: Difficulty,
    /// Inclusive range of compounded sinusoid counts.
    pub n_components: (usize, usize),
    /// Inclusive range of integer frequencies, cycles per window.
    pub freq_cycles: (usize, usize),
    /// Amplitude range, inclusive-exclusive.
    pub amp: (f64, f64),
    /// Phase range in radians, inclusive-exclusive.
    pub phase: (f64, f64),
}

/// The three default classes: one / two-to-three / four-to-six components on
/// disjoint frequency, amplitude and phase bands.
pub fn default_class_specs() -> [ArtificialClassSpec; 3] {
    use std::f64::consts::PI;
    [
        ArtificialClassSpec {
            name: Difficulty::Easy,
            n_components: (1, 1),
            freq_cycles: (1, 4),
            amp: (0.5, 1.0),
            phase: (0.0, 2.0 * PI / 3.0),
        },
        ArtificialClassSpec {
            name: Difficulty::Medium,
            n_components: (2, 3),
            freq_cycles: (6, 12),
            amp: (0.3, 0.5),
            phase: (2.0 * PI / 3.0, 4.0 * PI / 3.0),
        },
        ArtificialClassSpec {
            name: Difficulty::Hard,
            n_components: (4, 6),
            freq_cycles: (14, 24),
            amp: (0.1, 0.3),
            phase: (4.0 * PI / 3.0, 2.0 * PI),
        },
    ]
}

fn ranges_overlap(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

/// Pairwise disjointness in every field, as the class construction requires.
pub fn validate_class_specs(specs: &[ArtificialClassSpec]) -> Result<(), DataError> {
    for s in specs {
        if s.n_components.0 > s.n_components.1
            || s.n_components.0 == 0
            || s.freq_cycles.0 > s.freq_cycles.1
            || s.freq_cycles.0 == 0
            || s.amp.0 >= s.amp.1
            || s.amp.0 <= 0.0
            || s.phase.0 >= s.phase.1
        {
            return Err(DataError::BadSpec { detail: format!("invalid ranges for {}", s.name.name()) });
        }
    }
    for (i, a) in specs.iter().enumerate() {
        for b in specs.iter().skip(i + 1) {
            let int_overlap = |x: (usize, usize), y: (usize, usize)| x.0 <= y.1 && y.0 <= x.1;
            if int_overlap(a.n_components, b.n_components)
                || int_overlap(a.freq_cycles, b.freq_cycles)
                || ranges_overlap(a.amp, b.amp)
                || ranges_overlap(a.phase, b.phase)
            {
                return Err(DataError::BadSpec {
                    detail: format!("{} and {} overlap", a.name.name(), b.name.name()),
                });
            }
        }
    }
    Ok(())
}

/// One window of compounded sinusoids; each channel is an independent draw.
pub fn gen_compound_wave(
    spec: &ArtificialClassSpec,
    t: usize,
    d: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Window, DataError> {
    if t < 8 {
        return Err(DataError::BadSpec { detail: format!("window length {t} < 8") });
    }
    if spec.freq_cycles.1 * 2 > t {
        return Err(DataError::BadSpec {
            detail: format!("max frequency {} exceeds Nyquist for T={t}", spec.freq_cycles.1),
        });
    }
    let mut w = Window::zeros(t, d);
    for c in 0..d {
        let m = rng.gen_range(spec.n_components.0..=spec.n_components.1);
        for _ in 0..m {
            let f = rng.gen_range(spec.freq_cycles.0..=spec.freq_cycles.1) as f64;
            let a = rng.gen_range(spec.amp.0..spec.amp.1);
            let phi = rng.gen_range(spec.phase.0..spec.phase.1);
            for ti in 0..t {
                let v = a * (2.0 * std::f64::consts::PI * f * ti as f64 / t as f64 + phi).sin();
                w.data[ti * d + c] += v;
            }
        }
    }
    Ok(w)
}

/// Balanced artificial corpus: `n_total / classes` windows per class, labeled
/// with plain one-hot class identities (no lifetime).
pub fn gen_artificial_dataset(
    n_total: usize,
    t: usize,
    d: usize,
    specs: &[ArtificialClassSpec],
    seed: u64,
) -> Result<Vec<WindowRecord>, DataError> {
    validate_class_specs(specs)?;
    if n_total == 0 || n_total % specs.len() != 0 {
        return Err(DataError::BadSpec {
            detail: format!("{n_total} windows cannot be balanced over {} classes", specs.len()),
        });
    }
    let per_class = n_total / specs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n_total);
    for (ci, spec) in specs.iter().enumerate() {
        for i in 0..per_class {
            let window = gen_compound_wave(spec, t, d, &mut rng)?;
            records.push(WindowRecord {
                window,
                label: ConditionLabel::onehot(ci, specs.len()),
                source: Provenance {
                    source_id: spec.name.name().to_string(),
                    start: (i * t) as u64,
                    synthetic: false,
                },
            });
        }
    }
    Ok(records)
}
