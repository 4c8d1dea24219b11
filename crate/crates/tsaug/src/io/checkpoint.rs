//! Checkpoint format: a TOML header (config echo plus the data-derived
//! shape), step counters, the training RNG state, and every named parameter
//! tensor with its optimizer moments as little-endian f32.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gan::{GanError, LossConfig, TrainState};
use crate::io::config::RunConfig;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TSCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Window shape and label layout the model was built for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeInfo {
    pub t: usize,
    pub d: usize,
    pub label_dim: usize,
    pub label_has_lifetime: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: RunConfig,
    pub shape: ShapeInfo,
}

fn io_err(path: &Path, e: std::io::Error) -> GanError {
    GanError::Config { detail: format!("checkpoint {}: {e}", path.display()) }
}

pub fn save_checkpoint(path: &Path, state: &TrainState, header: &CheckpointHeader) -> Result<(), GanError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    let write = |w: &mut BufWriter<File>, bytes: &[u8]| -> Result<(), GanError> {
        w.write_all(bytes).map_err(|e| io_err(path, e))
    };
    write(&mut w, CHECKPOINT_MAGIC)?;
    write(&mut w, &CHECKPOINT_VERSION.to_le_bytes())?;
    let header_text =
        toml::to_string(header).map_err(|e| GanError::Config { detail: e.to_string() })?;
    write(&mut w, &(header_text.len() as u32).to_le_bytes())?;
    write(&mut w, header_text.as_bytes())?;
    write(&mut w, &state.step.to_le_bytes())?;
    write(&mut w, &state.critic_updates.to_le_bytes())?;
    write(&mut w, &state.rng.get_seed())?;
    write(&mut w, &state.rng.get_word_pos().to_le_bytes())?;
    write(&mut w, &(state.store.len() as u32).to_le_bytes())?;
    for (_, p) in state.store.iter() {
        write(&mut w, &(p.name.len() as u32).to_le_bytes())?;
        write(&mut w, p.name.as_bytes())?;
        write(&mut w, &(p.shape.len() as u32).to_le_bytes())?;
        for &e in &p.shape {
            write(&mut w, &(e as u32).to_le_bytes())?;
        }
        for series in [&p.data, &p.m, &p.v] {
            for &v in series {
                write(&mut w, &(v as f32).to_le_bytes())?;
            }
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Rebuild a training state from a checkpoint. The model is reconstructed
/// from the header's config, then parameter values, moments, counters and
/// the RNG position are restored. Forward outputs match the pre-save model
/// to f32 round-trip error.
pub fn load_checkpoint(path: &Path) -> Result<(TrainState, CheckpointHeader), GanError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| io_err(path, e))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(GanError::Config { detail: format!("bad checkpoint magic {magic:?}") });
    }
    let mut b4 = [0u8; 4];
    let mut read_u32 = |r: &mut BufReader<File>| -> Result<u32, GanError> {
        r.read_exact(&mut b4).map_err(|e| io_err(path, e))?;
        Ok(u32::from_le_bytes(b4))
    };
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(GanError::Config { detail: format!("unsupported checkpoint version {version}") });
    }
    let header_len = read_u32(&mut r)? as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes).map_err(|e| io_err(path, e))?;
    let header: CheckpointHeader = toml::from_str(
        std::str::from_utf8(&header_bytes)
            .map_err(|e| GanError::Config { detail: e.to_string() })?,
    )
    .map_err(|e| GanError::Config { detail: e.to_string() })?;

    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8).map_err(|e| io_err(path, e))?;
    let step = u64::from_le_bytes(b8);
    r.read_exact(&mut b8).map_err(|e| io_err(path, e))?;
    let critic_updates = u64::from_le_bytes(b8);
    let mut seed = [0u8; 32];
    r.read_exact(&mut seed).map_err(|e| io_err(path, e))?;
    let mut b16 = [0u8; 16];
    r.read_exact(&mut b16).map_err(|e| io_err(path, e))?;
    let word_pos = u128::from_le_bytes(b16);

    let shape = &header.shape;
    let gen_cfg = header.config.generator_config(shape.t, shape.d, shape.label_dim);
    let critic_cfg = header.config.critic_config(shape.t, shape.d, shape.label_dim);
    let loss_cfg: LossConfig = header.config.loss_config();
    let mut state = TrainState::new(
        gen_cfg,
        critic_cfg,
        loss_cfg,
        header.config.run.batch_size,
        header.config.run.seed,
    )?;

    let read_u32b = |r: &mut BufReader<File>| -> Result<u32, GanError> {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(|e| io_err(path, e))?;
        Ok(u32::from_le_bytes(b))
    };
    let count = read_u32b(&mut r)? as usize;
    if count != state.store.len() {
        return Err(GanError::Config {
            detail: format!("checkpoint has {count} parameters, model has {}", state.store.len()),
        });
    }
    for idx in 0..count {
        let name_len = read_u32b(&mut r)? as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes).map_err(|e| io_err(path, e))?;
        let name = String::from_utf8(name_bytes).map_err(|e| GanError::Config { detail: e.to_string() })?;
        let rank = read_u32b(&mut r)? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(read_u32b(&mut r)? as usize);
        }
        let pid = crate::nn::params::ParamId(idx);
        {
            let p = state.store.get(pid);
            if p.name != name || p.shape != dims {
                return Err(GanError::Config {
                    detail: format!("parameter {idx}: checkpoint {name} {dims:?} vs model {} {:?}", p.name, p.shape),
                });
            }
        }
        let numel: usize = dims.iter().product();
        let read_series = |r: &mut BufReader<File>| -> Result<Vec<f64>, GanError> {
            let mut out = Vec::with_capacity(numel);
            let mut b = [0u8; 4];
            for _ in 0..numel {
                r.read_exact(&mut b).map_err(|e| io_err(path, e))?;
                out.push(f32::from_le_bytes(b) as f64);
            }
            Ok(out)
        };
        let data = read_series(&mut r)?;
        let m = read_series(&mut r)?;
        let v = read_series(&mut r)?;
        let p = state.store.get_mut(pid);
        p.data = data;
        p.m = m;
        p.v = v;
    }

    state.step = step;
    state.critic_updates = critic_updates;
    state.rng = ChaCha8Rng::from_seed(seed);
    state.rng.set_word_pos(word_pos);
    Ok((state, header))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::{CriticConfig, GeneratorConfig};
    use crate::nn::params::{Binder, Fwd};
    use crate::tensor::Tape;
    use crate::window::{ConditionLabel, Window};

    fn small_run_config() -> (RunConfig, ShapeInfo) {
        let mut cfg = RunConfig::default();
        cfg.generator.noise_dim = 4;
        cfg.generator.label_proj_dim = 4;
        cfg.generator.t_seed = 4;
        cfg.generator.d_seed = 4;
        cfg.generator.shuffle_threshold = 16;
        cfg.generator.ga_threshold = 16;
        cfg.generator.n_heads = 2;
        cfg.generator.ffn_mult = 2;
        cfg.critic.d_model = 4;
        cfg.critic.d_inject = 4;
        cfg.critic.head_hidden = 4;
        cfg.critic.n_heads = 2;
        cfg.critic.ffn_mult = 2;
        cfg.loss.n_critic = 1;
        cfg.run.batch_size = 2;
        cfg.run.max_steps = 2;
        let shape = ShapeInfo { t: 8, d: 1, label_dim: 2, label_has_lifetime: false };
        (cfg, shape)
    }

    fn build_state(cfg: &RunConfig, shape: &ShapeInfo) -> TrainState {
        let g: GeneratorConfig = cfg.generator_config(shape.t, shape.d, shape.label_dim);
        let c: CriticConfig = cfg.critic_config(shape.t, shape.d, shape.label_dim);
        TrainState::new(g, c, cfg.loss_config(), cfg.run.batch_size, cfg.run.seed).unwrap()
    }

    fn gen_output(state: &TrainState) -> Vec<f64> {
        let noise = vec![0.3; 1 * state.gen.cfg.noise_dim];
        let label = ConditionLabel::onehot(0, 2).to_vec();
        let mut tape = Tape::new();
        let mut binder = Binder::new(&state.store, false);
        let mut fw = Fwd::new(&mut tape, &state.store, &mut binder);
        let n = fw.tape.leaf(&[1, state.gen.cfg.noise_dim], noise, false).unwrap();
        let l = fw.tape.leaf(&[1, 2], label, false).unwrap();
        let y = state.gen.forward(&mut fw, n, l).unwrap();
        tape.data(y).to_vec()
    }

    #[test]
    fn roundtrip_restores_forward_and_counters() {
        let (cfg, shape) = small_run_config();
        let mut state = build_state(&cfg, &shape);
        let data = TrainingDataStub::build();
        for _ in 0..2 {
            state.train_step(&data).unwrap();
        }
        let before = gen_output(&state);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.tsck");
        let header = CheckpointHeader { config: cfg, shape };
        save_checkpoint(&path, &state, &header).unwrap();
        let (restored, header2) = load_checkpoint(&path).unwrap();
        assert_eq!(header2, header);
        assert_eq!(restored.step, state.step);
        assert_eq!(restored.critic_updates, state.critic_updates);
        assert_eq!(restored.rng.get_word_pos(), state.rng.get_word_pos());

        // relative to the output scale: per-element denominators on values
        // that cancel to near zero would overstate the f32 round-trip error
        let after = gen_output(&restored);
        let scale = before.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() / scale < 1e-6, "{a} vs {b} at scale {scale}");
        }
    }

    struct TrainingDataStub;
    impl TrainingDataStub {
        fn build() -> crate::gan::TrainingSet {
            let windows: Vec<Window> = (0..6)
                .map(|i| Window::new(8, 1, (0..8).map(|t| ((i + t) as f64 * 0.9).sin()).collect()))
                .collect();
            let labels = (0..6).map(|i| ConditionLabel::onehot(i % 2, 2)).collect();
            crate::gan::TrainingSet { t: 8, d: 1, windows, labels }
        }
    }

    #[test]
    fn resumed_training_continues() {
        let (cfg, shape) = small_run_config();
        let mut state = build_state(&cfg, &shape);
        let data = TrainingDataStub::build();
        state.train_step(&data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.tsck");
        save_checkpoint(&path, &state, &CheckpointHeader { config: cfg, shape }).unwrap();
        let (mut restored, _) = load_checkpoint(&path).unwrap();
        let stats = restored.train_step(&data).unwrap();
        assert_eq!(stats.step, 2);
        assert!(stats.critic_loss.is_finite());
    }
}
