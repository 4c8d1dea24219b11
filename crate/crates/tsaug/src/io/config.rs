//! Run configuration: a flat-sectioned TOML file mirroring the generator,
//! critic, loss, data and run knobs. Window length, channel count and label
//! width come from the corpus, not the config.

use serde::{Deserialize, Serialize};

use crate::gan::{CriticConfig, GanError, GeneratorConfig, LossConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSection {
    pub noise_dim: usize,
    pub label_proj_dim: usize,
    pub t_seed: usize,
    pub d_seed: usize,
    pub shuffle_threshold: usize,
    pub ga_threshold: usize,
    pub n_heads: usize,
    pub ffn_mult: usize,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        Self {
            noise_dim: 100,
            label_proj_dim: 500,
            t_seed: 16,
            d_seed: 64,
            shuffle_threshold: 128,
            ga_threshold: 64,
            n_heads: 4,
            ffn_mult: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CriticSection {
    pub d_model: usize,
    pub patch_len0: usize,
    pub d_inject: usize,
    pub head_hidden: usize,
    pub n_heads: usize,
    pub ffn_mult: usize,
    pub psa_factor: f64,
}

impl Default for CriticSection {
    fn default() -> Self {
        Self {
            d_model: 64,
            patch_len0: 1,
            d_inject: 32,
            head_hidden: 64,
            n_heads: 4,
            ffn_mult: 4,
            psa_factor: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossSection {
    pub lambda_gp: f64,
    pub lambda_label: f64,
    pub label_weights: Option<Vec<f64>>,
    pub n_critic: usize,
    pub smoothing_eps: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        let l = LossConfig::default();
        Self {
            lambda_gp: l.lambda_gp,
            lambda_label: l.lambda_label,
            label_weights: None,
            n_critic: l.n_critic,
            smoothing_eps: l.smoothing_eps,
            lr: l.lr,
            beta1: l.beta1,
            beta2: l.beta2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub seed: u64,
    pub max_steps: u64,
    pub batch_size: usize,
    pub checkpoint_every: u64,
    pub eval_every: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 42, max_steps: 500, batch_size: 8, checkpoint_every: 100, eval_every: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub generator: GeneratorSection,
    pub critic: CriticSection,
    pub loss: LossSection,
    pub data: DataSection,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, GanError> {
        toml::from_str(text).map_err(|e| GanError::Config { detail: e.to_string() })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }

    /// Instantiate the generator configuration for a corpus of the given
    /// window shape and label width.
    pub fn generator_config(&self, t_target: usize, d_out: usize, label_dim: usize) -> GeneratorConfig {
        let g = &self.generator;
        GeneratorConfig {
            noise_dim: g.noise_dim,
            label_proj_dim: g.label_proj_dim,
            label_dim,
            t_seed: g.t_seed,
            d_seed: g.d_seed,
            t_target,
            d_out,
            shuffle_threshold: g.shuffle_threshold,
            ga_threshold: g.ga_threshold,
            n_heads: g.n_heads,
            ffn_mult: g.ffn_mult,
        }
    }

    pub fn critic_config(&self, t_window: usize, d_window: usize, label_dim: usize) -> CriticConfig {
        let c = &self.critic;
        CriticConfig {
            d_model: c.d_model,
            patch_len0: c.patch_len0,
            t_window,
            d_window,
            d_inject: c.d_inject,
            head_hidden: c.head_hidden,
            label_dim,
            n_heads: c.n_heads,
            ffn_mult: c.ffn_mult,
            psa_factor: c.psa_factor,
        }
    }

    pub fn loss_config(&self) -> LossConfig {
        let l = &self.loss;
        LossConfig {
            lambda_gp: l.lambda_gp,
            lambda_label: l.lambda_label,
            label_weights: l.label_weights.clone(),
            n_critic: l.n_critic,
            smoothing_eps: l.smoothing_eps,
            lr: l.lr,
            beta1: l.beta1,
            beta2: l.beta2,
        }
    }

    /// Validate every section against the invariants of the types it feeds,
    /// for the given corpus shape, before any work starts.
    pub fn validate(&self, t: usize, d: usize, label_dim: usize) -> Result<(), GanError> {
        self.generator_config(t, d, label_dim).validate()?;
        self.critic_config(t, d, label_dim).validate()?;
        self.loss_config().validate(label_dim)?;
        if self.run.batch_size == 0 || self.run.max_steps == 0 {
            return Err(GanError::Config { detail: "batch_size and max_steps must be positive".into() });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg = RunConfig::from_toml("[run]\nseed = 7\n[generator]\nt_seed = 8\n").unwrap();
        assert_eq!(cfg.run.seed, 7);
        assert_eq!(cfg.generator.t_seed, 8);
        assert_eq!(cfg.generator.noise_dim, 100);
        assert_eq!(cfg.loss.n_critic, 5);
    }

    #[test]
    fn validation_runs_all_sections() {
        let mut cfg = RunConfig::default();
        cfg.generator.t_seed = 24; // not a power of two
        assert!(cfg.validate(64, 2, 3).is_err());
    }
}
