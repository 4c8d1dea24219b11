//! The unit of real and synthetic data: a T x D window of samples.

use serde::{Deserialize, Serialize};

/// Dense T x D real matrix, time-major: `data[t * d + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub t: usize,
    pub d: usize,
    pub data: Vec<f64>,
}

impl Window {
    pub fn new(t: usize, d: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), t * d, "window data length");
        Self { t, d, data }
    }

    pub fn zeros(t: usize, d: usize) -> Self {
        Self { t, d, data: vec![0.0; t * d] }
    }

    pub fn get(&self, t: usize, c: usize) -> f64 {
        self.data[t * self.d + c]
    }

    pub fn set(&mut self, t: usize, c: usize, v: f64) {
        self.data[t * self.d + c] = v;
    }

    /// One channel as a contiguous series.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        (0..self.t).map(|t| self.data[t * self.d + c]).collect()
    }
}

/// Conditioning label: a one-hot class/experiment identity, optionally
/// extended with the fraction of run lifetime elapsed at the window start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionLabel {
    pub onehot: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifetime: Option<f64>,
}

impl ConditionLabel {
    pub fn onehot(class: usize, classes: usize) -> Self {
        let mut onehot = vec![0.0; classes];
        onehot[class] = 1.0;
        Self { onehot, lifetime: None }
    }

    pub fn with_lifetime(class: usize, classes: usize, lifetime: f64) -> Self {
        let mut l = Self::onehot(class, classes);
        l.lifetime = Some(lifetime);
        l
    }

    /// Flat vector form: one-hot entries, then the lifetime when present.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.onehot.clone();
        if let Some(l) = self.lifetime {
            v.push(l);
        }
        v
    }

    pub fn from_vec(v: &[f64], has_lifetime: bool) -> Self {
        if has_lifetime {
            Self { onehot: v[..v.len() - 1].to_vec(), lifetime: Some(v[v.len() - 1]) }
        } else {
            Self { onehot: v.to_vec(), lifetime: None }
        }
    }

    pub fn dim(&self) -> usize {
        self.onehot.len() + usize::from(self.lifetime.is_some())
    }

    pub fn is_valid(&self) -> bool {
        self.onehot.iter().all(|&x| (0.0..=1.0).contains(&x))
            && self.lifetime.map_or(true, |l| (0.0..=1.0).contains(&l))
    }
}
