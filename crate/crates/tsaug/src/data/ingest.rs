//! Accelerometer CSV ingestion: per-run file lists are concatenated into one
//! multichannel series, and series are cut into labeled windows.

use std::path::{Path, PathBuf};

use crate::data::record::{Provenance, WindowRecord};
use crate::data::DataError;
use crate::window::{ConditionLabel, Window};

/// One run-to-failure recording: D channels over N samples, time-major.
#[derive(Debug, Clone)]
pub struct Series {
    pub d: usize,
    pub data: Vec<f64>,
}

impl Series {
    pub fn len(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Read and concatenate one run's CSV files in the given (time) order,
/// keeping the channel columns at `columns`. Rows must be numeric at those
/// columns; failures report the file and 1-based line.
pub fn ingest_accel_csv(files: &[PathBuf], columns: &[usize]) -> Result<Series, DataError> {
    if columns.is_empty() {
        return Err(DataError::BadSpec { detail: "no channel columns".into() });
    }
    let mut data = Vec::new();
    for path in files {
        read_file(path, columns, &mut data)?;
    }
    if data.is_empty() {
        return Err(DataError::EmptyRun);
    }
    Ok(Series { d: columns.len(), data })
}

fn read_file(path: &Path, columns: &[usize], out: &mut Vec<f64>) -> Result<(), DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| DataError::Io { detail: format!("{}: {e}", path.display()) })?;
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| DataError::MalformedRow {
            file: path.display().to_string(),
            line,
            detail: e.to_string(),
        })?;
        for &col in columns {
            let field = record.get(col).ok_or_else(|| DataError::MalformedRow {
                file: path.display().to_string(),
                line,
                detail: format!("missing column {col}"),
            })?;
            let value: f64 = field.trim().parse().map_err(|_| DataError::MalformedRow {
                file: path.display().to_string(),
                line,
                detail: format!("column {col}: not a number: {field:?}"),
            })?;
            out.push(value);
        }
    }
    Ok(())
}

/// Cut a series into windows of `t` steps at offsets `0, stride, ...`. Each
/// label carries the run one-hot plus the lifetime fraction
/// `start / (N - t)`, clamped to [0,1]; a run exactly one window long gets
/// lifetime 0.
pub fn window_series(
    series: &Series,
    t: usize,
    run_id: &str,
    run_onehot: &[f64],
    stride: usize,
) -> Result<Vec<WindowRecord>, DataError> {
    if !t.is_power_of_two() {
        return Err(DataError::BadSpec { detail: format!("window length {t} is not a power of two") });
    }
    if stride == 0 {
        return Err(DataError::BadSpec { detail: "stride must be >= 1".into() });
    }
    let n = series.len();
    if n < t {
        return Err(DataError::SeriesTooShort { len: n, window: t });
    }
    let denom = (n - t) as f64;
    let mut records = Vec::new();
    let mut start = 0;
    while start + t <= n {
        let data = series.data[start * series.d..(start + t) * series.d].to_vec();
        let lifetime = if n == t { 0.0 } else { (start as f64 / denom).clamp(0.0, 1.0) };
        records.push(WindowRecord {
            window: Window::new(t, series.d, data),
            label: ConditionLabel {
                onehot: run_onehot.to_vec(),
                lifetime: Some(lifetime),
            },
            source: Provenance { source_id: run_id.to_string(), start: start as u64, synthetic: false },
        });
        start += stride;
    }
    Ok(records)
}
