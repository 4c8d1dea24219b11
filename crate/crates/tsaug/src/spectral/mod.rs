//! Spectral evaluation suite: periodogram -> normalized power spectrum, the
//! exact 1-D Wasserstein-2 distance between spectra, per-segment distances,
//! and set-level reports.

pub mod fft;
pub mod npsd;
pub mod report;
pub mod wasserstein;

pub use npsd::{
    mean_npsd, normalize_psd, npsd_from_mass, npsd_of, npsd_of_with, periodogram,
    periodogram_with, Npsd, NpsdSet, SpectralError,
};
pub use report::{segment_distance, set_report, standard_distance, write_spectra_csv, SetReport};
pub use wasserstein::wasserstein2_1d;
