//! Conditional generator: a label-conditioned seed tensor repeatedly run
//! through [encoder block -> up-scale -> positional table] stages until it
//! reaches the target length, then projected to the data channels.

use rand_chacha::ChaCha8Rng;

use crate::gan::GanError;
use crate::nn::attention::{AttnKind, BlockParams};
use crate::nn::embed::LapeTable;
use crate::nn::encoder::EncoderBlock;
use crate::nn::params::{Fwd, Linear, ParamStore};
use crate::nn::resample::upsample_bicubic;
use crate::tensor::TensorId;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub noise_dim: usize,
    pub label_proj_dim: usize,
    pub label_dim: usize,
    pub t_seed: usize,
    pub d_seed: usize,
    pub t_target: usize,
    pub d_out: usize,
    /// Pixel shuffle is used once the current T reaches this size; bicubic
    /// interpolation below it.
    pub shuffle_threshold: usize,
    /// Canonical attention at or below this T; grid attention above it, with
    /// this value as the partition length.
    pub ga_threshold: usize,
    pub n_heads: usize,
    pub ffn_mult: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            noise_dim: 100,
            label_proj_dim: 500,
            label_dim: 3,
            t_seed: 16,
            d_seed: 64,
            t_target: 64,
            d_out: 2,
            shuffle_threshold: 128,
            ga_threshold: 64,
            n_heads: 4,
            ffn_mult: 4,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GanError> {
        let bad = |detail: String| Err(GanError::Config { detail });
        if !self.t_seed.is_power_of_two() || !self.t_target.is_power_of_two() {
            return bad(format!("t_seed {} and t_target {} must be powers of two", self.t_seed, self.t_target));
        }
        if self.t_target < self.t_seed {
            return bad(format!("t_target {} < t_seed {}", self.t_target, self.t_seed));
        }
        if !self.ga_threshold.is_power_of_two() {
            return bad(format!("ga_threshold {} must be a power of two", self.ga_threshold));
        }
        for (name, v) in [
            ("noise_dim", self.noise_dim),
            ("label_proj_dim", self.label_proj_dim),
            ("label_dim", self.label_dim),
            ("d_seed", self.d_seed),
            ("d_out", self.d_out),
            ("n_heads", self.n_heads),
            ("ffn_mult", self.ffn_mult),
            ("shuffle_threshold", self.shuffle_threshold),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        stage_plan(self).map(|_| ())
    }

    pub fn n_stages(&self) -> usize {
        (self.t_target / self.t_seed).trailing_zeros() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Upscale {
    Bicubic,
    PixelShuffle,
}

/// One up-scaling stage of the plan: its input extents, attention kind, and
/// the up-scaler that follows the block.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSpec {
    pub t_in: usize,
    pub d_in: usize,
    pub attn: AttnKind,
    pub upscale: Upscale,
    pub t_out: usize,
    pub d_out: usize,
}

/// Enumerate the stages implied by the thresholds: bicubic while
/// `T < shuffle_threshold` (shuffle from there on, halving depth), canonical
/// attention while `T <= ga_threshold` (grid above, partitioned at the
/// threshold).
pub fn stage_plan(cfg: &GeneratorConfig) -> Result<Vec<StageSpec>, GanError> {
    let mut stages = Vec::with_capacity(cfg.n_stages());
    let mut t = cfg.t_seed;
    let mut d = cfg.d_seed;
    while t < cfg.t_target {
        let attn = if t <= cfg.ga_threshold {
            AttnKind::Canonical
        } else {
            AttnKind::Grid { partition_len: cfg.ga_threshold }
        };
        let upscale = if t < cfg.shuffle_threshold { Upscale::Bicubic } else { Upscale::PixelShuffle };
        let d_out = match upscale {
            Upscale::Bicubic => d,
            Upscale::PixelShuffle => {
                if d % 2 != 0 {
                    return Err(GanError::Config {
                        detail: format!("depth {d} becomes odd before the shuffle stage at T={t}"),
                    });
                }
                d / 2
            }
        };
        if d % cfg.n_heads != 0 || (d / cfg.n_heads) % 2 != 0 {
            return Err(GanError::Config {
                detail: format!("stage depth {d} incompatible with {} heads", cfg.n_heads),
            });
        }
        stages.push(StageSpec { t_in: t, d_in: d, attn, upscale, t_out: 2 * t, d_out });
        t *= 2;
        d = d_out;
    }
    Ok(stages)
}

pub struct GeneratorWeights {
    pub cfg: GeneratorConfig,
    pub plan: Vec<StageSpec>,
    pub label_proj: Linear,
    pub seed_proj: Linear,
    /// Positional tables: one where the seed enters the pipeline, then one
    /// after every up-scaling stage.
    pub lape: Vec<LapeTable>,
    pub blocks: Vec<EncoderBlock>,
    pub out_proj: Linear,
}

impl GeneratorWeights {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, cfg: GeneratorConfig) -> Result<Self, GanError> {
        cfg.validate()?;
        let plan = stage_plan(&cfg)?;
        let label_proj = Linear::new(store, rng, "gen.label_proj", cfg.label_dim, cfg.label_proj_dim, true);
        let seed_proj = Linear::new(
            store,
            rng,
            "gen.seed_proj",
            cfg.noise_dim + cfg.label_proj_dim,
            cfg.t_seed * cfg.d_seed,
            true,
        );
        let mut lape = vec![LapeTable::new(store, "gen.lape0", cfg.t_seed, cfg.d_seed)];
        let mut blocks = Vec::with_capacity(plan.len());
        for (i, stage) in plan.iter().enumerate() {
            let bp = BlockParams {
                d_model: stage.d_in,
                n_heads: cfg.n_heads,
                ffn_mult: cfg.ffn_mult,
                attn: stage.attn,
            };
            blocks.push(EncoderBlock::new(store, rng, &format!("gen.stage{i}"), bp));
            lape.push(LapeTable::new(store, &format!("gen.lape{}", i + 1), stage.t_out, stage.d_out));
        }
        let d_final = plan.last().map_or(cfg.d_seed, |s| s.d_out);
        let out_proj = Linear::new(store, rng, "gen.out_proj", d_final, cfg.d_out, true);
        Ok(Self { cfg, plan, label_proj, seed_proj, lape, blocks, out_proj })
    }

    /// Project the label, concatenate with the noise, and reshape the joint
    /// projection into the seed tensor.
    pub fn condition_embed(&self, fw: &mut Fwd, noise: TensorId, label: TensorId) -> Result<TensorId, GanError> {
        let b = fw.tape.shape(noise)[0];
        if fw.tape.shape(noise) != [b, self.cfg.noise_dim] {
            return Err(GanError::Config {
                detail: format!("noise shape {:?}", fw.tape.shape(noise)),
            });
        }
        if fw.tape.shape(label) != [b, self.cfg.label_dim] {
            return Err(GanError::LabelDim { want: self.cfg.label_dim, got: fw.tape.shape(label)[1] });
        }
        let lab = self.label_proj.forward(fw, label)?;
        let cat = fw.tape.concat(&[noise, lab], 1)?;
        let seed = self.seed_proj.forward(fw, cat)?;
        Ok(fw.tape.reshape(seed, &[b, self.cfg.t_seed, self.cfg.d_seed])?)
    }

    /// Full generation path; output is `[B, t_target, d_out]` on the
    /// normalized scale.
    pub fn forward(&self, fw: &mut Fwd, noise: TensorId, label: TensorId) -> Result<TensorId, GanError> {
        let mut x = self.condition_embed(fw, noise, label)?;
        x = self.lape[0].forward(fw, x)?;
        for (i, stage) in self.plan.iter().enumerate() {
            let positions: Vec<usize> = (0..stage.t_in).collect();
            x = self.blocks[i].forward(fw, x, &positions, 0)?;
            x = match stage.upscale {
                Upscale::Bicubic => upsample_bicubic(fw.tape, x)?,
                Upscale::PixelShuffle => fw.tape.pixel_shuffle(x)?,
            };
            x = self.lape[i + 1].forward(fw, x)?;
        }
        Ok(self.out_proj.forward(fw, x)?)
    }
}
