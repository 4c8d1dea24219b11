//! Data supply: the compound-sine artificial dataset, accelerometer CSV
//! ingestion, windowing with lifetime labels, splitting, normalization, and
//! the binary corpus format.

pub mod artificial;
pub mod corpus;
pub mod ingest;
pub mod norm;
pub mod record;
pub mod split;

use std::fmt;

pub use artificial::{
    default_class_specs, gen_artificial_dataset, gen_compound_wave, validate_class_specs,
    ArtificialClassSpec, Difficulty,
};
pub use corpus::{read_corpus, sidecar_path, write_corpus, NormSet, Sidecar, CORPUS_MAGIC};
pub use ingest::{ingest_accel_csv, window_series, Series};
pub use norm::{apply_norm, fit_norm, invert_norm, NormParams};
pub use record::{Provenance, WindowRecord};
pub use split::{split_dataset, Split, Subset};

#[derive(Debug, Clone, PartialEq)]
pub enum DataError {
    Io { detail: String },
    MalformedRow { file: String, line: usize, detail: String },
    EmptyRun,
    SeriesTooShort { len: usize, window: usize },
    ZeroVariance,
    BadSpec { detail: String },
    BadCorpus { detail: String },
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Io { detail } => write!(f, "io error: {detail}"),
            Self::MalformedRow { file, line, detail } => {
                write!(f, "{file}:{line}: malformed row: {detail}")
            }
            Self::EmptyRun => write!(f, "run contains no samples"),
            Self::SeriesTooShort { len, window } => {
                write!(f, "series of {len} samples is shorter than one {window}-step window")
            }
            Self::ZeroVariance => write!(f, "zero-variance channel"),
            Self::BadSpec { detail } => write!(f, "invalid specification: {detail}"),
            Self::BadCorpus { detail } => write!(f, "corpus format error: {detail}"),
        }
    }
}

impl std::error::Error for DataError {}
