//! Dual-head critic: a hierarchical feature extractor that re-injects the
//! raw window at coarsening patch sizes while halving the token count per
//! stage, feeding an unbounded realness head and a sigmoid label head.

use rand_chacha::ChaCha8Rng;

use crate::gan::GanError;
use crate::nn::attention::{AttnKind, BlockParams};
use crate::nn::embed::{LapeTable, PatchEmbed};
use crate::nn::encoder::EncoderBlock;
use crate::nn::params::{Fwd, Linear, ParamStore};
use crate::nn::resample::Distill;
use crate::tensor::TensorId;

#[derive(Debug, Clone, PartialEq)]
pub struct CriticConfig {
    pub d_model: usize,
    pub patch_len0: usize,
    /// Window length; the stage count is log2(t_window / patch_len0).
    pub t_window: usize,
    /// Window channel depth.
    pub d_window: usize,
    /// Width of the raw re-injection embedding concatenated at each stage.
    pub d_inject: usize,
    pub head_hidden: usize,
    pub label_dim: usize,
    pub n_heads: usize,
    pub ffn_mult: usize,
    pub psa_factor: f64,
}

impl Default for CriticConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            patch_len0: 1,
            t_window: 64,
            d_window: 2,
            d_inject: 32,
            head_hidden: 64,
            label_dim: 3,
            n_heads: 4,
            ffn_mult: 4,
            psa_factor: 5.0,
        }
    }
}

impl CriticConfig {
    pub fn validate(&self) -> Result<(), GanError> {
        let bad = |detail: String| Err(GanError::Config { detail });
        if !self.t_window.is_power_of_two() {
            return bad(format!("window length {} is not a power of two", self.t_window));
        }
        if self.patch_len0 == 0 || self.t_window % self.patch_len0 != 0 {
            return bad(format!("patch length {} does not divide T={}", self.patch_len0, self.t_window));
        }
        if !(self.t_window / self.patch_len0).is_power_of_two() {
            return bad(format!(
                "token count {} after patching is not a power of two",
                self.t_window / self.patch_len0
            ));
        }
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return bad(format!("d_model {} vs heads {}", self.d_model, self.n_heads));
        }
        if (self.d_model / self.n_heads) % 2 != 0 {
            return bad(format!("odd head dim {}", self.d_model / self.n_heads));
        }
        for (name, v) in [
            ("d_window", self.d_window),
            ("d_inject", self.d_inject),
            ("head_hidden", self.head_hidden),
            ("label_dim", self.label_dim),
            ("ffn_mult", self.ffn_mult),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.psa_factor <= 0.0 {
            return bad(format!("psa_factor {} must be positive", self.psa_factor));
        }
        Ok(())
    }

    /// Temporal halvings needed to reduce the token sequence to rank 2.
    pub fn n_stages(&self) -> usize {
        (self.t_window / self.patch_len0).trailing_zeros() as usize
    }
}

pub struct CriticStage {
    pub inject: PatchEmbed,
    pub fuse: Linear,
    pub lape: LapeTable,
    pub block: EncoderBlock,
    pub distill: Distill,
}

pub struct CriticWeights {
    pub cfg: CriticConfig,
    pub patch0: PatchEmbed,
    pub stages: Vec<CriticStage>,
    pub adv_hidden: Linear,
    pub adv_out: Linear,
    pub label_hidden: Linear,
    pub label_out: Linear,
}

pub const HEAD_LEAKY_SLOPE: f64 = 0.2;

impl CriticWeights {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, cfg: CriticConfig) -> Result<Self, GanError> {
        cfg.validate()?;
        let patch0 = PatchEmbed::new(store, rng, "critic.patch0", cfg.patch_len0, cfg.d_window, cfg.d_model);
        let n_stages = cfg.n_stages();
        let mut stages = Vec::with_capacity(n_stages);
        for i in 0..n_stages {
            let tokens = (cfg.t_window / cfg.patch_len0) >> i;
            let name = format!("critic.stage{i}");
            let bp = BlockParams {
                d_model: cfg.d_model,
                n_heads: cfg.n_heads,
                ffn_mult: cfg.ffn_mult,
                attn: AttnKind::Psa { factor: cfg.psa_factor },
            };
            stages.push(CriticStage {
                inject: PatchEmbed::new(
                    store,
                    rng,
                    &format!("{name}.inject"),
                    cfg.patch_len0 << i,
                    cfg.d_window,
                    cfg.d_inject,
                ),
                fuse: Linear::new(store, rng, &format!("{name}.fuse"), cfg.d_model + cfg.d_inject, cfg.d_model, true),
                lape: LapeTable::new(store, &format!("{name}.lape"), tokens, cfg.d_model),
                block: EncoderBlock::new(store, rng, &format!("{name}.block"), bp),
                distill: Distill::new(store, rng, &format!("{name}.distill"), cfg.d_model),
            });
        }
        let adv_hidden = Linear::new(store, rng, "critic.adv_hidden", cfg.d_model, cfg.head_hidden, true);
        let adv_out = Linear::new(store, rng, "critic.adv_out", cfg.head_hidden, 1, true);
        let label_hidden = Linear::new(store, rng, "critic.label_hidden", cfg.d_model, cfg.head_hidden, true);
        let label_out = Linear::new(store, rng, "critic.label_out", cfg.head_hidden, cfg.label_dim, true);
        Ok(Self { cfg, patch0, stages, adv_hidden, adv_out, label_hidden, label_out })
    }

    /// Rank-2 features after the full extraction pipeline: `[B, d_model]`.
    fn extract(&self, fw: &mut Fwd, window: TensorId, psa_seed: u64) -> Result<TensorId, GanError> {
        let shape = fw.tape.shape(window).to_vec();
        if shape.len() != 3 || shape[1] != self.cfg.t_window || shape[2] != self.cfg.d_window {
            return Err(GanError::Config {
                detail: format!(
                    "window {shape:?} vs configured {}x{}",
                    self.cfg.t_window, self.cfg.d_window
                ),
            });
        }
        let b = shape[0];
        let mut x = self.patch0.forward(fw, window)?;
        for (i, stage) in self.stages.iter().enumerate() {
            let raw = stage.inject.forward(fw, window)?;
            let cat = fw.tape.concat(&[x, raw], 2)?;
            x = stage.fuse.forward(fw, cat)?;
            x = stage.lape.forward(fw, x)?;
            let tokens = fw.tape.shape(x)[1];
            let positions: Vec<usize> = (0..tokens).collect();
            let seed = psa_seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            x = stage.block.forward(fw, x, &positions, seed)?;
            x = stage.distill.forward(fw, x)?;
        }
        debug_assert_eq!(fw.tape.shape(x)[1], 1);
        Ok(fw.tape.reshape(x, &[b, self.cfg.d_model])?)
    }

    /// Realness scores (unbounded, `[B]`) and label estimates
    /// (`[B, label_dim]`, each in (0,1)).
    pub fn forward(&self, fw: &mut Fwd, window: TensorId, psa_seed: u64) -> Result<(TensorId, TensorId), GanError> {
        let features = self.extract(fw, window, psa_seed)?;
        let adv = self.adversarial_head(fw, features)?;
        let lh = self.label_hidden.forward(fw, features)?;
        let lh = fw.tape.leaky_relu(lh, HEAD_LEAKY_SLOPE);
        let ll = self.label_out.forward(fw, lh)?;
        let label = fw.tape.sigmoid(ll);
        Ok((adv, label))
    }

    /// Realness head alone; the path the gradient penalty differentiates.
    pub fn forward_adv(&self, fw: &mut Fwd, window: TensorId, psa_seed: u64) -> Result<TensorId, GanError> {
        let features = self.extract(fw, window, psa_seed)?;
        self.adversarial_head(fw, features)
    }

    fn adversarial_head(&self, fw: &mut Fwd, features: TensorId) -> Result<TensorId, GanError> {
        let b = fw.tape.shape(features)[0];
        let h = self.adv_hidden.forward(fw, features)?;
        let h = fw.tape.leaky_relu(h, HEAD_LEAKY_SLOPE);
        let out = self.adv_out.forward(fw, h)?;
        Ok(fw.tape.reshape(out, &[b])?)
    }
}
