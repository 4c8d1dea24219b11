//! Seeded test/train/validate partition.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Test,
    Train,
    Validate,
}

/// Record indices of each subset, in shuffled order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub test: Vec<usize>,
    pub train: Vec<usize>,
    pub validate: Vec<usize>,
}

impl Split {
    /// Per-record subset tags aligned with the original record order.
    pub fn assignment(&self, n: usize) -> Vec<Subset> {
        let mut tags = vec![Subset::Train; n];
        for &i in &self.test {
            tags[i] = Subset::Test;
        }
        for &i in &self.train {
            tags[i] = Subset::Train;
        }
        for &i in &self.validate {
            tags[i] = Subset::Validate;
        }
        tags
    }
}

/// Shuffle indices with the seed, then cut contiguous test/train/validate
/// blocks. Sizes are floor-allocated from the fractions with remainders going
/// to train, so every subset is within one record of its exact share. Each
/// subset gets at least one record (its normalization must be fittable).
pub fn split_dataset(
    n_records: usize,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<Split, DataError> {
    let (f_test, f_train, f_val) = fractions;
    if (f_test + f_train + f_val - 1.0).abs() > 1e-9 || f_test < 0.0 || f_train < 0.0 || f_val < 0.0 {
        return Err(DataError::BadSpec { detail: format!("fractions {fractions:?} must sum to 1") });
    }
    if n_records < 3 {
        return Err(DataError::BadSpec { detail: format!("{n_records} records cannot be split") });
    }
    let mut indices: Vec<usize> = (0..n_records).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let n_test = ((f_test * n_records as f64).floor() as usize).max(1);
    let n_val = ((f_val * n_records as f64).floor() as usize).max(1);
    let test = indices[..n_test].to_vec();
    let validate = indices[n_test..n_test + n_val].to_vec();
    let train = indices[n_test + n_val..].to_vec();
    Ok(Split { test, train, validate })
}
