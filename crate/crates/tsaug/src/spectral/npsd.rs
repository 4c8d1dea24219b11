//! Periodogram and its normalization into a probability distribution over
//! frequency.

use std::fmt;

use crate::spectral::fft::real_dft_power;

pub type Result<T> = std::result::Result<T, SpectralError>;

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralError {
    /// Signal shorter than two samples.
    TooShort { len: usize },
    /// Total power is zero or non-finite; the normalized spectrum is
    /// undefined for such signals.
    ZeroPower,
    /// Spectra live on different frequency grids.
    GridMismatch { a: usize, b: usize },
    /// Window shapes disagree.
    ShapeMismatch { detail: String },
    /// A set operation was given no members.
    EmptySet,
}

impl fmt::Display for SpectralError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::TooShort { len } => write!(f, "signal of length {len} is too short"),
            Self::ZeroPower => write!(f, "zero or non-finite total power"),
            Self::GridMismatch { a, b } => write!(f, "frequency grids differ: T={a} vs T={b}"),
            Self::ShapeMismatch { detail } => write!(f, "shape mismatch: {detail}"),
            Self::EmptySet => write!(f, "empty spectrum set"),
        }
    }
}

impl std::error::Error for SpectralError {}

/// Normalized one-sided power spectrum on the grid `k/T`, `k = 0..=T/2`.
/// Masses are non-negative and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Npsd {
    t_len: usize,
    pub mass: Vec<f64>,
}

impl Npsd {
    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Normalized frequency of bin `k`, in cycles per sample.
    pub fn freq(&self, k: usize) -> f64 {
        k as f64 / self.t_len as f64
    }

    pub fn freqs(&self) -> Vec<f64> {
        (0..self.mass.len()).map(|k| self.freq(k)).collect()
    }
}

/// One-sided power spectrum of a signal: `|X_k|^2` with interior bins doubled
/// to account for the discarded negative frequencies. The mean is removed
/// first by default (`remove_mean = true`) so a DC offset cannot dominate.
pub fn periodogram_with(signal: &[f64], remove_mean: bool) -> Result<Vec<f64>> {
    let t = signal.len();
    if t < 2 {
        return Err(SpectralError::TooShort { len: t });
    }
    let owned;
    let input: &[f64] = if remove_mean {
        let mean = signal.iter().sum::<f64>() / t as f64;
        owned = signal.iter().map(|x| x - mean).collect::<Vec<f64>>();
        &owned
    } else {
        signal
    };
    let mut power = real_dft_power(input);
    // interior bins carry both half-spectra; bin 0 and (for even T) Nyquist do not
    let last_interior = if t % 2 == 0 { power.len() - 2 } else { power.len() - 1 };
    for p in power.iter_mut().take(last_interior + 1).skip(1) {
        *p *= 2.0;
    }
    Ok(power)
}

/// [`periodogram_with`] at the default configuration (mean removal on).
pub fn periodogram(signal: &[f64]) -> Result<Vec<f64>> {
    periodogram_with(signal, true)
}

/// Divide a power spectrum by its total power.
pub fn normalize_psd(psd: &[f64], t_len: usize) -> Result<Npsd> {
    let total: f64 = psd.iter().sum();
    if total <= 0.0 || !total.is_finite() || psd.iter().any(|p| !p.is_finite()) {
        return Err(SpectralError::ZeroPower);
    }
    Ok(Npsd { t_len, mass: psd.iter().map(|p| p / total).collect() })
}

/// Periodogram plus normalization, the usual path from signal to spectrum.
pub fn npsd_of(signal: &[f64]) -> Result<Npsd> {
    let psd = periodogram(signal)?;
    normalize_psd(&psd, signal.len())
}

pub fn npsd_of_with(signal: &[f64], remove_mean: bool) -> Result<Npsd> {
    let psd = periodogram_with(signal, remove_mean)?;
    normalize_psd(&psd, signal.len())
}

/// A collection of spectra on one shared grid.
#[derive(Debug, Clone)]
pub struct NpsdSet {
    members: Vec<Npsd>,
}

impl NpsdSet {
    pub fn new(members: Vec<Npsd>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(SpectralError::EmptySet);
        };
        let t = first.t_len;
        for m in &members {
            if m.t_len != t || m.mass.len() != first.mass.len() {
                return Err(SpectralError::GridMismatch { a: t, b: m.t_len });
            }
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[Npsd] {
        &self.members
    }

    pub fn n(&self) -> usize {
        self.members.len()
    }

    pub fn t_len(&self) -> usize {
        self.members[0].t_len
    }
}

/// Element-wise arithmetic mean of the member masses; still sums to one.
pub fn mean_npsd(set: &NpsdSet) -> Npsd {
    let n = set.members.len() as f64;
    let len = set.members[0].mass.len();
    let mut mass = vec![0.0; len];
    for m in &set.members {
        for (acc, &v) in mass.iter_mut().zip(&m.mass) {
            *acc += v;
        }
    }
    for v in mass.iter_mut() {
        *v /= n;
    }
    Npsd { t_len: set.t_len(), mass }
}

/// Test/construction helper: a spectrum with given masses on the grid of a
/// length-`t_len` window.
pub fn npsd_from_mass(t_len: usize, mass: Vec<f64>) -> Result<Npsd> {
    normalize_psd(&mass, t_len)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn pure_cosine_concentrates_in_its_bin() {
        let t = 64;
        let k = 5;
        let amp = 2.3;
        let signal: Vec<f64> = (0..t).map(|i| amp * (2.0 * PI * k as f64 * i as f64 / t as f64).cos()).collect();
        let psd = periodogram(&signal).unwrap();
        let total: f64 = psd.iter().sum();
        assert!(psd[k] / total > 0.999999, "bin share {}", psd[k] / total);
        let npsd = npsd_of(&signal).unwrap();
        assert!((npsd.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_signal_has_zero_psd_and_no_npsd() {
        let signal = vec![0.0; 16];
        let psd = periodogram(&signal).unwrap();
        assert!(psd.iter().all(|&p| p == 0.0));
        assert_eq!(npsd_of(&signal), Err(SpectralError::ZeroPower));
    }

    #[test]
    fn scaling_scales_psd_quadratically() {
        let signal: Vec<f64> = (0..32).map(|i| (i as f64 * 0.7).sin() + 0.2 * (i as f64 * 1.9).cos()).collect();
        let alpha = 3.0;
        let scaled: Vec<f64> = signal.iter().map(|x| x * alpha).collect();
        let p1 = periodogram(&signal).unwrap();
        let p2 = periodogram(&scaled).unwrap();
        for (a, b) in p1.iter().zip(&p2) {
            assert!((b - alpha * alpha * a).abs() < 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn npsd_scale_invariant() {
        let psd = vec![1.0, 2.0, 3.0, 4.0];
        let scaled: Vec<f64> = psd.iter().map(|p| 7.0 * p).collect();
        let a = normalize_psd(&psd, 6).unwrap();
        let b = normalize_psd(&scaled, 6).unwrap();
        for (x, y) in a.mass.iter().zip(&b.mass) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn already_normalized_is_identity() {
        let mass = vec![0.25, 0.5, 0.25];
        let n = normalize_psd(&mass, 4).unwrap();
        assert_eq!(n.mass, mass);
    }

    #[test]
    fn freq_grid_is_k_over_t() {
        let n = npsd_from_mass(8, vec![1.0; 5]).unwrap();
        assert_eq!(n.freqs(), vec![0.0, 0.125, 0.25, 0.375, 0.5]);
    }

    #[test]
    fn mean_of_identical_members_is_the_member() {
        let m = npsd_from_mass(8, vec![0.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        let set = NpsdSet::new(vec![m.clone(), m.clone(), m.clone()]).unwrap();
        let mean = mean_npsd(&set);
        for (a, b) in mean.mass.iter().zip(&m.mass) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn too_short_rejected() {
        assert_eq!(periodogram(&[1.0]), Err(SpectralError::TooShort { len: 1 }));
    }
}
