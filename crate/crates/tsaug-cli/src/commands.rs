//! Command implementations. Each validates its inputs fully before touching
//! the filesystem.

use std::path::{Path, PathBuf};

use tsaug::data::{
    read_corpus, sidecar_path, write_corpus, ingest_accel_csv, window_series, DataError,
    NormParams, NormSet, Provenance, Sidecar, WindowRecord,
};
use tsaug::data::{fit_norm, split_dataset};
use tsaug::gan::synthesize;
use tsaug::harness::{
    eval_corpora, run_training, spectra_columns, write_artificial_corpus, HarnessError,
};
use tsaug::io::checkpoint::load_checkpoint;
use tsaug::io::config::RunConfig;
use tsaug::spectral::write_spectra_csv;
use tsaug::window::ConditionLabel;

pub type CmdResult = Result<(), HarnessError>;

fn usage(detail: impl Into<String>) -> HarnessError {
    HarnessError::Usage { detail: detail.into() }
}

pub fn gen_data(out: &Path, n: usize, t: usize, d: usize, seed: u64) -> CmdResult {
    if !t.is_power_of_two() || t < 8 {
        return Err(usage(format!("--t {t} must be a power of two >= 8")));
    }
    if n == 0 || n % 3 != 0 {
        return Err(usage(format!("--n {n} must be a positive multiple of 3 (balanced classes)")));
    }
    if d == 0 {
        return Err(usage("--d must be >= 1"));
    }
    let (n_test, n_train, n_val) = write_artificial_corpus(out, n, t, d, seed)?;
    println!("wrote {n} windows ({} per class) to {}", n / 3, out.display());
    println!("split: test {n_test} / train {n_train} / validate {n_val}");
    Ok(())
}

/// Runs are either loose `<run>.csv` files or `<run>/` directories of csv
/// parts (sorted by name) directly under `dir`.
fn discover_runs(dir: &Path) -> Result<Vec<(String, Vec<PathBuf>)>, HarnessError> {
    let mut runs: Vec<(String, Vec<PathBuf>)> = Vec::new();
    let entries = std::fs::read_dir(dir)
        .map_err(|e| usage(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    paths.sort();
    for path in paths {
        if path.is_dir() {
            let mut parts: Vec<PathBuf> = std::fs::read_dir(&path)
                .map_err(|e| usage(format!("{}: {e}", path.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect();
            parts.sort();
            if !parts.is_empty() {
                runs.push((path.file_name().unwrap().to_string_lossy().into_owned(), parts));
            }
        } else if path.extension().is_some_and(|x| x == "csv") {
            let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
            runs.push((stem, vec![path]));
        }
    }
    if runs.is_empty() {
        return Err(HarnessError::Data(DataError::EmptyRun));
    }
    Ok(runs)
}

#[allow(clippy::too_many_arguments)]
pub fn ingest(
    dir: &Path,
    window: usize,
    stride: usize,
    columns: &[usize],
    out: &Path,
    seed: u64,
) -> CmdResult {
    if !window.is_power_of_two() {
        return Err(usage(format!("--window {window} must be a power of two")));
    }
    if stride == 0 {
        return Err(usage("--stride must be >= 1"));
    }
    if columns.is_empty() {
        return Err(usage("--columns must name at least one channel column"));
    }
    let runs = discover_runs(dir)?;
    let k = runs.len();
    let mut records: Vec<WindowRecord> = Vec::new();
    for (i, (run_id, files)) in runs.iter().enumerate() {
        let series = ingest_accel_csv(files, columns)?;
        let mut onehot = vec![0.0; k];
        onehot[i] = 1.0;
        records.extend(window_series(&series, window, run_id, &onehot, stride)?);
    }
    if records.len() < 3 {
        return Err(HarnessError::Data(DataError::BadSpec {
            detail: format!("only {} windows; need at least 3 to split", records.len()),
        }));
    }
    let split = split_dataset(records.len(), (0.2, 0.7, 0.1), seed)?;
    let fit = |idx: &[usize]| fit_norm(idx.iter().map(|&i| &records[i].window));
    let norm = NormSet { test: fit(&split.test)?, train: fit(&split.train)?, validate: fit(&split.validate)? };
    let tags = split.assignment(records.len());
    write_corpus(out, &records, Some(tags), Some(norm))?;
    println!(
        "ingested {k} runs into {} windows of {window}x{} at {}",
        records.len(),
        columns.len(),
        out.display()
    );
    Ok(())
}

pub fn train(config_path: Option<&Path>, data: &Path, out_dir: &Path, resume: Option<&Path>) -> CmdResult {
    let config = match config_path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| usage(format!("{}: {e}", p.display())))?;
            RunConfig::from_toml(&text).map_err(HarnessError::Gan)?
        }
        None => RunConfig::default(),
    };
    let outcome = run_training(&config, data, out_dir, resume)?;
    println!(
        "trained {} steps; metrics at {}, final checkpoint at {}",
        outcome.steps_run,
        outcome.metrics_path.display(),
        outcome.final_checkpoint.display()
    );
    Ok(())
}

pub fn synth(
    ckpt: &Path,
    labels_path: &Path,
    n_per_label: usize,
    out: &Path,
    seed: u64,
    norm_from: Option<&Path>,
) -> CmdResult {
    if n_per_label == 0 {
        return Err(usage("--n must be >= 1"));
    }
    let labels_text = std::fs::read_to_string(labels_path)
        .map_err(|e| usage(format!("{}: {e}", labels_path.display())))?;
    let labels: Vec<ConditionLabel> = serde_json::from_str(&labels_text)
        .map_err(|e| usage(format!("{}: {e}", labels_path.display())))?;
    if labels.is_empty() || labels.iter().any(|l| !l.is_valid()) {
        return Err(usage("label file must hold a non-empty list of valid labels"));
    }
    let (state, header) = load_checkpoint(ckpt)?;
    let norm = match norm_from {
        Some(corpus) => {
            let sc_path = sidecar_path(corpus);
            let text = std::fs::read_to_string(&sc_path)
                .map_err(|e| usage(format!("{}: {e}", sc_path.display())))?;
            let sidecar: Sidecar = serde_json::from_str(&text)
                .map_err(|e| usage(format!("{}: {e}", sc_path.display())))?;
            sidecar
                .norm
                .ok_or_else(|| usage(format!("{} carries no normalization parameters", sc_path.display())))?
                .train
        }
        None => NormParams::identity(header.shape.d),
    };
    let windows = synthesize(&state.store, &state.gen, &labels, n_per_label, &norm, seed)?;
    let records: Vec<WindowRecord> = windows
        .into_iter()
        .enumerate()
        .map(|(i, window)| WindowRecord {
            window,
            label: labels[i / n_per_label].clone(),
            source: Provenance {
                source_id: format!("synthetic/label{}", i / n_per_label),
                start: (i % n_per_label) as u64,
                synthetic: true,
            },
        })
        .collect();
    write_corpus(out, &records, None, None)?;
    println!("synthesized {} windows to {}", records.len(), out.display());
    Ok(())
}

pub fn eval(real: &Path, synth: &Path, report_path: &Path, max_windows: usize) -> CmdResult {
    if max_windows < 2 {
        return Err(usage("--max-windows must be >= 2"));
    }
    let (real_records, _) = read_corpus(real)?;
    let (synth_records, _) = read_corpus(synth)?;
    let report = eval_corpora(&real_records, &synth_records, max_windows)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| usage(e.to_string()))?;
    std::fs::write(report_path, &json)
        .map_err(|e| usage(format!("{}: {e}", report_path.display())))?;
    println!("inter-set distance (channel mean): {:.6}", report.mean.inter);
    println!("report written to {}", report_path.display());
    Ok(())
}

pub fn spectra(data: &Path, count: usize, out: &Path) -> CmdResult {
    let (records, _) = read_corpus(data)?;
    let (grid, columns) = spectra_columns(&records, count)?;
    let mut buf = Vec::new();
    write_spectra_csv(&mut buf, &grid, &columns)
        .map_err(|e| usage(e.to_string()))?;
    std::fs::write(out, &buf).map_err(|e| usage(format!("{}: {e}", out.display())))?;
    println!("wrote {} spectra columns to {}", columns.len(), out.display());
    Ok(())
}
