//! Pure-transformer conditional GAN for time-series augmentation, with a
//! spectral Wasserstein evaluation suite and the two experiment datasets.
//!
//! Layout:
//! - [`tensor`]: rank-1..3 tensors with a reverse-mode tape (double-backward
//!   capable) and a finite-difference gradient checker.
//! - [`nn`]: positional schemes, instance norm, the three attention variants,
//!   encoder block, patching, distillation and the two up-scaling operators.
//! - [`gan`]: conditional generator, dual-head critic, gradient-penalty
//!   losses, Adam, and the training loop.
//! - [`spectral`]: periodogram -> normalized power spectrum, the 1-D
//!   Wasserstein-2 distance between spectra, and set-level reports.
//! - [`data`]: compound-sine artificial dataset, accelerometer CSV ingestion,
//!   windowing, splitting, normalization, and the binary corpus format.
//! - [`io`]: run configuration (TOML), checkpoints, and the metrics log.

pub mod data;
pub mod gan;
pub mod harness;
pub mod io;
pub mod nn;
pub mod spectral;
pub mod tensor;
pub mod window;
