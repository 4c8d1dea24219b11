//! JSON-lines metrics log, one record per generator step.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::gan::{GanError, StepStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub critic_loss: f64,
    pub generator_loss: f64,
    pub gradient_penalty: f64,
    pub label_mse: f64,
}

impl From<StepStats> for MetricsRecord {
    fn from(s: StepStats) -> Self {
        Self {
            step: s.step,
            critic_loss: s.critic_loss,
            generator_loss: s.generator_loss,
            gradient_penalty: s.gradient_penalty,
            label_mse: s.label_mse,
        }
    }
}

pub struct MetricsWriter {
    out: BufWriter<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self, GanError> {
        let file = File::create(path)
            .map_err(|e| GanError::Config { detail: format!("metrics {}: {e}", path.display()) })?;
        Ok(Self { out: BufWriter::new(file) })
    }

    /// Append to an existing log (resumed runs).
    pub fn append(path: &Path) -> Result<Self, GanError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| GanError::Config { detail: format!("metrics {}: {e}", path.display()) })?;
        Ok(Self { out: BufWriter::new(file) })
    }

    pub fn write(&mut self, record: &MetricsRecord) -> Result<(), GanError> {
        let line = serde_json::to_string(record).map_err(|e| GanError::Config { detail: e.to_string() })?;
        writeln!(self.out, "{line}").map_err(|e| GanError::Config { detail: e.to_string() })?;
        self.out.flush().map_err(|e| GanError::Config { detail: e.to_string() })
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>, GanError> {
    let file = File::open(path)
        .map_err(|e| GanError::Config { detail: format!("metrics {}: {e}", path.display()) })?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| GanError::Config { detail: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| GanError::Config { detail: e.to_string() })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_read_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.jsonl");
        let records: Vec<MetricsRecord> = (1..=3)
            .map(|i| MetricsRecord {
                step: i,
                critic_loss: i as f64 * 0.5,
                generator_loss: -(i as f64),
                gradient_penalty: 0.1,
                label_mse: 0.01,
            })
            .collect();
        let mut w = MetricsWriter::create(&path).unwrap();
        for r in &records {
            w.write(r).unwrap();
        }
        drop(w);
        assert_eq!(read_metrics(&path).unwrap(), records);
    }
}
