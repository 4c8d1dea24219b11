//! Binary corpus format.
//!
//! Layout: magic `TSW1`, little-endian u32 fields {record_count, t, d,
//! label_dim}, then per record `label_dim` f32 values followed by `t*d` f32
//! values (time-major). A JSON sidecar at `<path>.json` carries normalization
//! parameters, the split assignment, and per-record provenance.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::norm::NormParams;
use crate::data::record::{Provenance, WindowRecord};
use crate::data::split::Subset;
use crate::data::DataError;
use crate::window::{ConditionLabel, Window};

pub const CORPUS_MAGIC: &[u8; 4] = b"TSW1";

/// Per-subset normalization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormSet {
    pub test: NormParams,
    pub train: NormParams,
    pub validate: NormParams,
}

impl NormSet {
    pub fn get(&self, subset: Subset) -> &NormParams {
        match subset {
            Subset::Test => &self.test,
            Subset::Train => &self.train,
            Subset::Validate => &self.validate,
        }
    }
}

/// JSON sidecar next to the binary corpus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub label_has_lifetime: bool,
    pub provenance: Vec<Provenance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Vec<Subset>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<NormSet>,
}

pub fn sidecar_path(corpus: &Path) -> PathBuf {
    let mut os = corpus.as_os_str().to_os_string();
    os.push(".json");
    PathBuf::from(os)
}

fn io_err(path: &Path, e: std::io::Error) -> DataError {
    DataError::Io { detail: format!("{}: {e}", path.display()) }
}

/// Write records and their sidecar. All records must share t, d and label
/// dimension; values are truncated to f32.
pub fn write_corpus(
    path: &Path,
    records: &[WindowRecord],
    split: Option<Vec<Subset>>,
    norm: Option<NormSet>,
) -> Result<(), DataError> {
    let Some(first) = records.first() else {
        return Err(DataError::BadSpec { detail: "no records to write".into() });
    };
    let (t, d) = (first.window.t, first.window.d);
    let label_dim = first.label.dim();
    let has_lifetime = first.label.lifetime.is_some();
    for r in records {
        if r.window.t != t || r.window.d != d || r.label.dim() != label_dim
            || r.label.lifetime.is_some() != has_lifetime
        {
            return Err(DataError::BadSpec { detail: "inconsistent record shapes".into() });
        }
    }

    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(CORPUS_MAGIC).map_err(|e| io_err(path, e))?;
    for v in [records.len() as u32, t as u32, d as u32, label_dim as u32] {
        w.write_all(&v.to_le_bytes()).map_err(|e| io_err(path, e))?;
    }
    for r in records {
        for v in r.label.to_vec() {
            w.write_all(&(v as f32).to_le_bytes()).map_err(|e| io_err(path, e))?;
        }
        for &v in &r.window.data {
            w.write_all(&(v as f32).to_le_bytes()).map_err(|e| io_err(path, e))?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))?;

    let sidecar = Sidecar {
        label_has_lifetime: has_lifetime,
        provenance: records.iter().map(|r| r.source.clone()).collect(),
        split,
        norm,
    };
    let sc_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| DataError::Io { detail: e.to_string() })?;
    std::fs::write(&sc_path, json).map_err(|e| io_err(&sc_path, e))?;
    Ok(())
}

/// Read a corpus and its sidecar.
pub fn read_corpus(path: &Path) -> Result<(Vec<WindowRecord>, Sidecar), DataError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| io_err(path, e))?;
    if &magic != CORPUS_MAGIC {
        return Err(DataError::BadCorpus { detail: format!("bad magic {magic:?}") });
    }
    let mut u32buf = [0u8; 4];
    let mut read_u32 = |r: &mut BufReader<File>| -> Result<u32, DataError> {
        r.read_exact(&mut u32buf).map_err(|e| io_err(path, e))?;
        Ok(u32::from_le_bytes(u32buf))
    };
    let count = read_u32(&mut r)? as usize;
    let t = read_u32(&mut r)? as usize;
    let d = read_u32(&mut r)? as usize;
    let label_dim = read_u32(&mut r)? as usize;
    if t == 0 || d == 0 || label_dim == 0 {
        return Err(DataError::BadCorpus { detail: format!("degenerate header {count}x{t}x{d}x{label_dim}") });
    }

    let sc_path = sidecar_path(path);
    let sc_text = std::fs::read_to_string(&sc_path).map_err(|e| io_err(&sc_path, e))?;
    let sidecar: Sidecar = serde_json::from_str(&sc_text)
        .map_err(|e| DataError::BadCorpus { detail: format!("sidecar: {e}") })?;
    if sidecar.provenance.len() != count {
        return Err(DataError::BadCorpus {
            detail: format!("sidecar lists {} records, corpus has {count}", sidecar.provenance.len()),
        });
    }

    let mut records = Vec::with_capacity(count);
    let mut f32buf = [0u8; 4];
    let mut read_f32s = |r: &mut BufReader<File>, n: usize| -> Result<Vec<f64>, DataError> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut f32buf).map_err(|e| io_err(path, e))?;
            out.push(f32::from_le_bytes(f32buf) as f64);
        }
        Ok(out)
    };
    for i in 0..count {
        let label_vals = read_f32s(&mut r, label_dim)?;
        let data = read_f32s(&mut r, t * d)?;
        records.push(WindowRecord {
            window: Window::new(t, d, data),
            label: ConditionLabel::from_vec(&label_vals, sidecar.label_has_lifetime),
            source: sidecar.provenance[i].clone(),
        });
    }
    Ok((records, sidecar))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_records(n: usize) -> Vec<WindowRecord> {
        (0..n)
            .map(|i| WindowRecord {
                window: Window::new(4, 2, (0..8).map(|j| (i * 8 + j) as f64 * 0.25).collect()),
                label: ConditionLabel::with_lifetime(i % 2, 2, i as f64 / n as f64),
                source: Provenance { source_id: format!("run{}", i % 3), start: (i * 4) as u64, synthetic: false },
            })
            .collect()
    }

    #[test]
    fn roundtrip_preserves_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.tsw");
        let records = sample_records(5);
        write_corpus(&path, &records, None, None).unwrap();
        let (back, sidecar) = read_corpus(&path).unwrap();
        assert_eq!(back.len(), 5);
        assert!(sidecar.label_has_lifetime);
        for (a, b) in back.iter().zip(&records) {
            assert_eq!(a.source, b.source);
            // f32 round-trip
            for (x, y) in a.window.data.iter().zip(&b.window.data) {
                assert!((x - y).abs() < 1e-6);
            }
            assert_eq!(a.label.onehot.len(), 2);
        }
    }

    #[test]
    fn rerun_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.tsw");
        let p2 = dir.path().join("b.tsw");
        let records = sample_records(4);
        write_corpus(&p1, &records, None, None).unwrap();
        write_corpus(&p2, &records, None, None).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(
            std::fs::read(sidecar_path(&p1)).unwrap(),
            std::fs::read(sidecar_path(&p2)).unwrap()
        );
    }

    #[test]
    fn bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.tsw");
        std::fs::write(&path, b"NOPE0000000000000000").unwrap();
        assert!(matches!(read_corpus(&path), Err(DataError::BadCorpus { .. })));
    }
}
