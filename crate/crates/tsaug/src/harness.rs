//! End-to-end orchestration shared by the command-line tools and the
//! integration tests: corpus -> split/normalize -> train loop with metrics
//! and checkpoints, plus corpus-level evaluation and spectra export.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    apply_norm, fit_norm, read_corpus, split_dataset, write_corpus, DataError, NormSet, Sidecar,
    Split, Subset, WindowRecord,
};
use crate::gan::{GanError, TrainState, TrainingSet};
use crate::io::checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader, ShapeInfo};
use crate::io::config::RunConfig;
use crate::io::metrics::{MetricsRecord, MetricsWriter};
use crate::spectral::{
    mean_npsd, npsd_of, segment_distance, set_report, NpsdSet, SetReport, SpectralError,
};
use crate::window::Window;

#[derive(Debug)]
pub enum HarnessError {
    Data(DataError),
    Gan(GanError),
    Spectral(SpectralError),
    /// Numeric abort: training hit a non-finite loss.
    NumericAbort { step: u64, detail: String },
    Usage { detail: String },
}

impl fmt::Display for HarnessError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Data(e) => write!(f, "{e}"),
            Self::Gan(e) => write!(f, "{e}"),
            Self::Spectral(e) => write!(f, "{e}"),
            Self::NumericAbort { step, detail } => write!(f, "numeric abort at step {step}: {detail}"),
            Self::Usage { detail } => write!(f, "{detail}"),
        }
    }
}

impl std::error::Error for HarnessError {}

impl From<DataError> for HarnessError {
    fn from(e: DataError) -> Self {
        Self::Data(e)
    }
}

impl From<GanError> for HarnessError {
    fn from(e: GanError) -> Self {
        Self::Gan(e)
    }
}

impl From<SpectralError> for HarnessError {
    fn from(e: SpectralError) -> Self {
        Self::Spectral(e)
    }
}

/// A corpus prepared for training: the split, per-subset normalization, and
/// the normalized train subset.
pub struct PreparedData {
    pub split: Split,
    pub norm: NormSet,
    pub train: TrainingSet,
    pub shape: ShapeInfo,
}

/// Use the sidecar's split and normalization when present; otherwise derive
/// them (20/70/10, seeded) and fit each subset's parameters independently.
pub fn prepare_training_data(
    records: &[WindowRecord],
    sidecar: &Sidecar,
    seed: u64,
) -> Result<PreparedData, HarnessError> {
    let Some(first) = records.first() else {
        return Err(HarnessError::Usage { detail: "corpus is empty".into() });
    };
    let (t, d) = (first.window.t, first.window.d);
    let split = match &sidecar.split {
        Some(tags) => {
            let mut split = Split { test: vec![], train: vec![], validate: vec![] };
            for (i, tag) in tags.iter().enumerate() {
                match tag {
                    Subset::Test => split.test.push(i),
                    Subset::Train => split.train.push(i),
                    Subset::Validate => split.validate.push(i),
                }
            }
            split
        }
        None => split_dataset(records.len(), (0.2, 0.7, 0.1), seed)?,
    };
    let norm = match &sidecar.norm {
        Some(n) => n.clone(),
        None => {
            let fit = |idx: &[usize]| fit_norm(idx.iter().map(|&i| &records[i].window));
            NormSet { test: fit(&split.test)?, train: fit(&split.train)?, validate: fit(&split.validate)? }
        }
    };
    let windows: Vec<Window> = split
        .train
        .iter()
        .map(|&i| apply_norm(&records[i].window, &norm.train))
        .collect();
    let labels = split.train.iter().map(|&i| records[i].label.clone()).collect();
    let label_dim = first.label.dim();
    Ok(PreparedData {
        split,
        norm,
        train: TrainingSet { t, d, windows, labels },
        shape: ShapeInfo {
            t,
            d,
            label_dim,
            label_has_lifetime: sidecar.label_has_lifetime,
        },
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalLine {
    pub step: u64,
    pub mean_wfd_to_train_mean: f64,
}

pub struct TrainOutcome {
    pub steps_run: u64,
    pub final_checkpoint: PathBuf,
    pub metrics_path: PathBuf,
}

/// Train per the config: `max_steps` generator steps, a metrics line per
/// step, checkpoints every `checkpoint_every` steps and at the end. On a
/// non-finite loss the run aborts and previously written checkpoints remain.
pub fn run_training(
    config: &RunConfig,
    corpus_path: &Path,
    out_dir: &Path,
    resume: Option<&Path>,
) -> Result<TrainOutcome, HarnessError> {
    let (records, sidecar) = read_corpus(corpus_path)?;
    let prepared = prepare_training_data(&records, &sidecar, config.run.seed)?;
    let shape = prepared.shape.clone();
    config.validate(shape.t, shape.d, shape.label_dim).map_err(HarnessError::Gan)?;

    std::fs::create_dir_all(out_dir)
        .map_err(|e| HarnessError::Usage { detail: format!("{}: {e}", out_dir.display()) })?;
    let metrics_path = out_dir.join("metrics.jsonl");

    let (mut state, header, mut metrics) = match resume {
        Some(ckpt) => {
            let (state, header) = load_checkpoint(ckpt)?;
            if header.shape != shape {
                return Err(HarnessError::Usage {
                    detail: format!("checkpoint shape {:?} vs corpus {:?}", header.shape, shape),
                });
            }
            (state, header, MetricsWriter::append(&metrics_path)?)
        }
        None => {
            let gen_cfg = config.generator_config(shape.t, shape.d, shape.label_dim);
            let critic_cfg = config.critic_config(shape.t, shape.d, shape.label_dim);
            let state = TrainState::new(
                gen_cfg,
                critic_cfg,
                config.loss_config(),
                config.run.batch_size,
                config.run.seed,
            )?;
            let header = CheckpointHeader { config: config.clone(), shape: shape.clone() };
            (state, header, MetricsWriter::create(&metrics_path)?)
        }
    };

    let mut eval_writer: Option<MetricsFileAppend> = None;
    let mut final_checkpoint = out_dir.join(format!("ckpt_step{}.tsck", state.step));
    while state.step < config.run.max_steps {
        let stats = match state.train_step(&prepared.train) {
            Ok(s) => s,
            Err(GanError::NanLoss { step }) => {
                return Err(HarnessError::NumericAbort {
                    step,
                    detail: "loss became non-finite; last good checkpoint retained".into(),
                });
            }
            Err(e) => return Err(e.into()),
        };
        metrics.write(&MetricsRecord::from(stats))?;

        if config.run.eval_every > 0 && state.step % config.run.eval_every == 0 {
            let line = quick_eval(&state, &prepared.train)?;
            let w = match &mut eval_writer {
                Some(w) => w,
                None => {
                    eval_writer = Some(MetricsFileAppend::create(&out_dir.join("eval.jsonl"))?);
                    eval_writer.as_mut().unwrap()
                }
            };
            w.write_json(&line)?;
        }

        let at_end = state.step >= config.run.max_steps;
        if at_end || (config.run.checkpoint_every > 0 && state.step % config.run.checkpoint_every == 0) {
            final_checkpoint = out_dir.join(format!("ckpt_step{}.tsck", state.step));
            save_checkpoint(&final_checkpoint, &state, &header)?;
        }
    }
    if !final_checkpoint.exists() {
        save_checkpoint(&final_checkpoint, &state, &header)?;
    }
    Ok(TrainOutcome { steps_run: state.step, final_checkpoint, metrics_path })
}

/// Mean segment distance from a small synthetic draw to the training data's
/// mean spectrum, per channel, averaged.
fn quick_eval(state: &TrainState, train: &TrainingSet) -> Result<EvalLine, HarnessError> {
    let wfd = mean_wfd_to_set_mean(state, train, 16, 0xEAA5)?;
    Ok(EvalLine { step: state.step, mean_wfd_to_train_mean: wfd })
}

/// Synthesize `n` windows (labels drawn round-robin from the set) and average
/// the per-channel distance between each synthetic spectrum and the set's
/// mean spectrum.
pub fn mean_wfd_to_set_mean(
    state: &TrainState,
    data: &TrainingSet,
    n: usize,
    seed: u64,
) -> Result<f64, HarnessError> {
    let labels: Vec<_> = (0..n).map(|i| data.labels[i % data.labels.len()].clone()).collect();
    let norm = crate::data::NormParams::identity(data.d);
    let synth = crate::gan::synthesize(&state.store, &state.gen, &labels, 1, &norm, seed)?;

    // per-channel mean spectrum of the data
    let mut total = 0.0;
    let mut count = 0usize;
    for c in 0..data.d {
        let members: Result<Vec<_>, SpectralError> =
            data.windows.iter().map(|w| npsd_of(&w.channel(c))).collect();
        let set = NpsdSet::new(members?)?;
        let mean = mean_npsd(&set);
        for w in &synth {
            let n = npsd_of(&w.channel(c))?;
            total += crate::spectral::wasserstein2_1d(&n, &mean)?;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

struct MetricsFileAppend {
    out: std::io::BufWriter<std::fs::File>,
}

impl MetricsFileAppend {
    fn create(path: &Path) -> Result<Self, HarnessError> {
        let f = std::fs::File::create(path)
            .map_err(|e| HarnessError::Usage { detail: format!("{}: {e}", path.display()) })?;
        Ok(Self { out: std::io::BufWriter::new(f) })
    }

    fn write_json<T: Serialize>(&mut self, v: &T) -> Result<(), HarnessError> {
        use std::io::Write;
        let line = serde_json::to_string(v).map_err(|e| HarnessError::Usage { detail: e.to_string() })?;
        writeln!(self.out, "{line}").map_err(|e| HarnessError::Usage { detail: e.to_string() })?;
        self.out.flush().map_err(|e| HarnessError::Usage { detail: e.to_string() })
    }
}

/// Corpus-vs-corpus evaluation: one spectrum set per channel per side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_channel: Vec<SetReport>,
    pub mean: EvalSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub intra_a: f64,
    pub intra_b: f64,
    pub inter: f64,
    pub pairwise_mean: f64,
}

/// Evenly spaced subsample of up to `cap` indices.
fn evenly_spaced(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    (0..cap).map(|j| j * (n - 1) / (cap - 1)).collect()
}

/// Build the set-vs-set report for every channel. `max_windows` caps each
/// side (evenly spaced subsample) because the pairwise term is quadratic.
pub fn eval_corpora(
    real: &[WindowRecord],
    synth: &[WindowRecord],
    max_windows: usize,
) -> Result<EvalReport, HarnessError> {
    let (Some(fr), Some(fs)) = (real.first(), synth.first()) else {
        return Err(HarnessError::Usage { detail: "empty corpus".into() });
    };
    if fr.window.t != fs.window.t || fr.window.d != fs.window.d {
        return Err(HarnessError::Spectral(SpectralError::ShapeMismatch {
            detail: format!(
                "{}x{} vs {}x{}",
                fr.window.t, fr.window.d, fs.window.t, fs.window.d
            ),
        }));
    }
    let d = fr.window.d;
    let ridx = evenly_spaced(real.len(), max_windows);
    let sidx = evenly_spaced(synth.len(), max_windows);
    let mut per_channel = Vec::with_capacity(d);
    for c in 0..d {
        let ra: Result<Vec<_>, SpectralError> =
            ridx.iter().map(|&i| npsd_of(&real[i].window.channel(c))).collect();
        let sa: Result<Vec<_>, SpectralError> =
            sidx.iter().map(|&i| npsd_of(&synth[i].window.channel(c))).collect();
        let set_a = NpsdSet::new(ra?)?;
        let set_b = NpsdSet::new(sa?)?;
        per_channel.push(set_report(&set_a, &set_b)?);
    }
    let n = d as f64;
    let mean = EvalSummary {
        intra_a: per_channel.iter().map(|r| r.intra_a).sum::<f64>() / n,
        intra_b: per_channel.iter().map(|r| r.intra_b).sum::<f64>() / n,
        inter: per_channel.iter().map(|r| r.inter).sum::<f64>() / n,
        pairwise_mean: per_channel.iter().map(|r| r.pairwise_mean).sum::<f64>() / n,
    };
    Ok(EvalReport { per_channel, mean })
}

/// Pick `count` evenly spaced windows per run (grouped by provenance source,
/// first-appearance order) and return one spectrum column per window channel,
/// named `source@start/ch<k>`.
pub fn spectra_columns(
    records: &[WindowRecord],
    count: usize,
) -> Result<(Vec<f64>, Vec<(String, Vec<f64>)>), HarnessError> {
    let Some(first) = records.first() else {
        return Err(HarnessError::Usage { detail: "empty corpus".into() });
    };
    if count == 0 {
        return Err(HarnessError::Usage { detail: "count must be >= 1".into() });
    }
    let mut runs: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        runs.entry(&r.source.source_id).or_default().push(i);
    }
    let mut columns = Vec::new();
    for (run, indices) in &runs {
        if count > indices.len() {
            return Err(HarnessError::Usage {
                detail: format!("count {count} exceeds the {} windows of run {run}", indices.len()),
            });
        }
        let picks: Vec<usize> = if count == 1 {
            vec![indices[0]]
        } else {
            (0..count).map(|j| indices[j * (indices.len() - 1) / (count - 1)]).collect()
        };
        for &i in &picks {
            let rec = &records[i];
            for c in 0..rec.window.d {
                let npsd = npsd_of(&rec.window.channel(c))?;
                columns.push((format!("{}@{}/ch{}", rec.source.source_id, rec.source.start, c), npsd.mass));
            }
        }
    }
    let grid: Vec<f64> = (0..=first.window.t / 2)
        .map(|k| k as f64 / first.window.t as f64)
        .collect();
    Ok((grid, columns))
}

/// Distance between two labeled corpora member-by-member is not needed; the
/// synthetic-output smoke check uses the mean segment distance to a
/// reference window set instead.
pub fn mean_segment_distance(windows: &[Window], reference: &Window) -> Result<f64, HarnessError> {
    if windows.is_empty() {
        return Err(HarnessError::Usage { detail: "no windows".into() });
    }
    let mut total = 0.0;
    for w in windows {
        total += segment_distance(w, reference)?;
    }
    Ok(total / windows.len() as f64)
}

/// Convenience used by tests and the CLI: write an artificial corpus with a
/// fresh 20/70/10 split and per-subset normalization in the sidecar.
pub fn write_artificial_corpus(
    path: &Path,
    n_total: usize,
    t: usize,
    d: usize,
    seed: u64,
) -> Result<(usize, usize, usize), HarnessError> {
    let specs = crate::data::default_class_specs();
    let records = crate::data::gen_artificial_dataset(n_total, t, d, &specs, seed)?;
    let split = split_dataset(records.len(), (0.2, 0.7, 0.1), seed)?;
    let fit = |idx: &[usize]| fit_norm(idx.iter().map(|&i| &records[i].window));
    let norm = NormSet { test: fit(&split.test)?, train: fit(&split.train)?, validate: fit(&split.validate)? };
    let tags = split.assignment(records.len());
    write_corpus(path, &records, Some(tags), Some(norm))?;
    Ok((split.test.len(), split.train.len(), split.validate.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Provenance;
    use crate::window::ConditionLabel;

    fn corpus_records(n: usize, runs: usize) -> Vec<WindowRecord> {
        (0..n)
            .map(|i| WindowRecord {
                window: Window::new(
                    16,
                    1,
                    (0..16)
                        .map(|t| {
                            (2.0 * std::f64::consts::PI * ((i % 3) + 2) as f64 * t as f64 / 16.0).sin()
                        })
                        .collect(),
                ),
                label: ConditionLabel::onehot(i % 2, 2),
                source: Provenance {
                    source_id: format!("run{}", i % runs),
                    start: (i / runs * 16) as u64,
                    synthetic: false,
                },
            })
            .collect()
    }

    #[test]
    fn evenly_spaced_matches_documented_rule() {
        let idx = evenly_spaced(100, 10);
        assert_eq!(idx, vec![0, 11, 22, 33, 44, 55, 66, 77, 88, 99]);
    }

    #[test]
    fn spectra_selection_per_run() {
        let records = corpus_records(20, 2);
        let (grid, cols) = spectra_columns(&records, 2).unwrap();
        assert_eq!(grid.len(), 9); // T/2 + 1 for T=16
        // 2 runs x 2 picks x 1 channel
        assert_eq!(cols.len(), 4);
        assert!(cols[0].0.starts_with("run0@"));
    }

    #[test]
    fn spectra_count_overflow_rejected() {
        let records = corpus_records(4, 2);
        assert!(spectra_columns(&records, 3).is_err());
    }

    #[test]
    fn eval_self_comparison_has_zero_inter() {
        let records = corpus_records(12, 2);
        let report = eval_corpora(&records, &records, 64).unwrap();
        assert_eq!(report.per_channel.len(), 1);
        assert!(report.mean.inter.abs() < 1e-15);
        assert!((report.mean.intra_a - report.mean.intra_b).abs() < 1e-15);
    }

    #[test]
    fn prepare_uses_sidecar_when_present() {
        let records = corpus_records(10, 2);
        let tags: Vec<Subset> = (0..10)
            .map(|i| if i < 2 { Subset::Test } else if i < 9 { Subset::Train } else { Subset::Validate })
            .collect();
        let norm = NormSet {
            test: crate::data::NormParams::identity(1),
            train: crate::data::NormParams { mean: vec![0.5], std: vec![2.0] },
            validate: crate::data::NormParams::identity(1),
        };
        let sidecar = Sidecar {
            label_has_lifetime: false,
            provenance: records.iter().map(|r| r.source.clone()).collect(),
            split: Some(tags),
            norm: Some(norm.clone()),
        };
        let prepared = prepare_training_data(&records, &sidecar, 0).unwrap();
        assert_eq!(prepared.train.len(), 7);
        assert_eq!(prepared.norm, norm);
        // normalization applied with the train params
        let want = (records[2].window.get(0, 0) - 0.5) / 2.0;
        assert!((prepared.train.windows[0].get(0, 0) - want).abs() < 1e-12);
    }
}
