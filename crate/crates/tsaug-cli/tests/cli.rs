//! End-to-end tests of the command-line surface: verbs, file formats, exit
//! codes, and determinism, driving the real binary.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tsaug"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn assert_code(out: &Output, want: i32) {
    assert_eq!(
        out.status.code(),
        Some(want),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

const SMALL_CONFIG: &str = r#"
[generator]
noise_dim = 8
label_proj_dim = 8
t_seed = 8
d_seed = 8
shuffle_threshold = 64
ga_threshold = 64
n_heads = 2
ffn_mult = 2

[critic]
d_model = 8
patch_len0 = 2
d_inject = 4
head_hidden = 8
n_heads = 2
ffn_mult = 2
psa_factor = 5.0

[loss]
n_critic = 2

[run]
seed = 5
max_steps = 10
batch_size = 2
checkpoint_every = 100
"#;

fn write_config(dir: &Path) -> PathBuf {
    let p = dir.join("cfg.toml");
    std::fs::write(&p, SMALL_CONFIG).unwrap();
    p
}

fn gen_small_corpus(dir: &Path) -> PathBuf {
    let corpus = dir.join("art.tsw");
    let out = run_in(dir, &["gen-data", "--out", "art.tsw", "--n", "60", "--t", "64", "--d", "2", "--seed", "9"]);
    assert_code(&out, 0);
    corpus
}

#[test]
fn gen_data_is_deterministic_and_balanced() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["gen-data", "--out", "a.tsw", "--n", "30", "--t", "64", "--d", "2", "--seed", "1"]);
    assert_code(&out, 0);
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("10 per class"), "{text}");
    let out = run_in(dir.path(), &["gen-data", "--out", "b.tsw", "--n", "30", "--t", "64", "--d", "2", "--seed", "1"]);
    assert_code(&out, 0);
    let a = std::fs::read(dir.path().join("a.tsw")).unwrap();
    let b = std::fs::read(dir.path().join("b.tsw")).unwrap();
    assert_eq!(a, b, "same flags must give byte-identical corpora");
}

#[test]
fn gen_data_rejects_unbalanced_total_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["gen-data", "--out", "x.tsw", "--n", "100", "--t", "64", "--d", "2"]);
    assert_code(&out, 1);
    assert!(!dir.path().join("x.tsw").exists(), "no partial output on flag errors");
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["gen-data", "--nope"]);
    assert_code(&out, 1);
}

fn write_run_csv(path: &Path, rows: usize, offset: usize) {
    let mut f = std::fs::File::create(path).unwrap();
    for i in 0..rows {
        let t = (offset + i) as f64;
        writeln!(f, "0,0,0,{i},{},{}", (t * 0.1).sin(), (t * 0.05).cos()).unwrap();
    }
}

#[test]
fn ingest_tiles_runs_and_records_norms() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    std::fs::create_dir(&raw).unwrap();
    write_run_csv(&raw.join("bearing1.csv"), 1024, 0);
    write_run_csv(&raw.join("bearing2.csv"), 1024, 5000);
    let out = run_in(dir.path(), &["ingest", "--dir", "raw", "--window", "256", "--out", "runs.tsw"]);
    assert_code(&out, 0);
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("8 windows"), "{text}");

    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("runs.tsw.json")).unwrap()).unwrap();
    for subset in ["test", "train", "validate"] {
        assert!(sidecar["norm"][subset]["mean"].is_array(), "missing norm for {subset}");
    }
    assert_eq!(sidecar["label_has_lifetime"], serde_json::Value::Bool(true));
}

#[test]
fn ingest_rejects_non_power_of_two_window() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    std::fs::create_dir(&raw).unwrap();
    write_run_csv(&raw.join("r.csv"), 512, 0);
    let out = run_in(dir.path(), &["ingest", "--dir", "raw", "--window", "100", "--out", "x.tsw"]);
    assert_code(&out, 1);
    assert!(!dir.path().join("x.tsw").exists());
}

#[test]
fn ingest_reports_malformed_row_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("raw");
    std::fs::create_dir(&raw).unwrap();
    let bad = raw.join("bad.csv");
    let mut f = std::fs::File::create(&bad).unwrap();
    writeln!(f, "0,0,0,0,1.0,2.0").unwrap();
    writeln!(f, "0,0,0,1,oops,2.0").unwrap();
    drop(f);
    let out = run_in(dir.path(), &["ingest", "--dir", "raw", "--window", "8", "--out", "x.tsw"]);
    assert_code(&out, 2);
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    assert!(err.contains("bad.csv") && err.contains(":2"), "{err}");
}

#[test]
fn train_writes_metrics_and_checkpoint_then_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = gen_small_corpus(dir.path());
    let cfg = write_config(dir.path());
    let out = run_in(dir.path(), &[
        "train", "--config", cfg.to_str().unwrap(), "--data", corpus.to_str().unwrap(), "--out", "run",
    ]);
    assert_code(&out, 0);
    let metrics = std::fs::read_to_string(dir.path().join("run/metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 10, "one record per generator step");
    let first: serde_json::Value = serde_json::from_str(metrics.lines().next().unwrap()).unwrap();
    for key in ["step", "critic_loss", "generator_loss", "gradient_penalty", "label_mse"] {
        assert!(first.get(key).is_some(), "missing {key}");
    }
    let ckpt = dir.path().join("run/ckpt_step10.tsck");
    assert!(ckpt.exists(), "final checkpoint written");

    // resume for 5 more steps
    let more = SMALL_CONFIG.replace("max_steps = 10", "max_steps = 15");
    std::fs::write(dir.path().join("cfg2.toml"), more).unwrap();
    let out = run_in(dir.path(), &[
        "train", "--config", "cfg2.toml", "--data", corpus.to_str().unwrap(), "--out", "run",
        "--resume", ckpt.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let metrics = std::fs::read_to_string(dir.path().join("run/metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 15);
    let last: serde_json::Value = serde_json::from_str(metrics.lines().last().unwrap()).unwrap();
    assert_eq!(last["step"], 15);
}

#[test]
fn same_seed_runs_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = gen_small_corpus(dir.path());
    let cfg = write_config(dir.path());
    for name in ["run_a", "run_b"] {
        let out = run_in(dir.path(), &[
            "train", "--config", cfg.to_str().unwrap(), "--data", corpus.to_str().unwrap(), "--out", name,
        ]);
        assert_code(&out, 0);
    }
    let a = std::fs::read(dir.path().join("run_a/metrics.jsonl")).unwrap();
    let b = std::fs::read(dir.path().join("run_b/metrics.jsonl")).unwrap();
    assert_eq!(a, b, "metrics logs must match bit-for-bit");
    let a = std::fs::read(dir.path().join("run_a/ckpt_step10.tsck")).unwrap();
    let b = std::fs::read(dir.path().join("run_b/ckpt_step10.tsck")).unwrap();
    assert_eq!(a, b, "checkpoints must match bit-for-bit");
}

#[test]
fn synth_emits_requested_windows_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = gen_small_corpus(dir.path());
    let cfg = write_config(dir.path());
    let out = run_in(dir.path(), &[
        "train", "--config", cfg.to_str().unwrap(), "--data", corpus.to_str().unwrap(), "--out", "run",
    ]);
    assert_code(&out, 0);
    std::fs::write(dir.path().join("labels.json"), r#"[{"onehot":[1.0,0.0,0.0]}]"#).unwrap();
    for name in ["s1.tsw", "s2.tsw"] {
        let out = run_in(dir.path(), &[
            "synth", "--ckpt", "run/ckpt_step10.tsck", "--labels", "labels.json",
            "--n", "64", "--out", name, "--seed", "4",
        ]);
        assert_code(&out, 0);
    }
    assert_eq!(
        std::fs::read(dir.path().join("s1.tsw")).unwrap(),
        std::fs::read(dir.path().join("s2.tsw")).unwrap()
    );
    // corpus header: count=64, t and d from the checkpoint config
    let bytes = std::fs::read(dir.path().join("s1.tsw")).unwrap();
    assert_eq!(&bytes[0..4], b"TSW1");
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    assert_eq!(u32_at(4), 64);
    assert_eq!(u32_at(8), 64); // t
    assert_eq!(u32_at(12), 2); // d
    // provenance marks the windows synthetic
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s1.tsw.json")).unwrap()).unwrap();
    assert_eq!(sidecar["provenance"][0]["synthetic"], serde_json::Value::Bool(true));
}

#[test]
fn synth_rejects_label_dim_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = gen_small_corpus(dir.path());
    let cfg = write_config(dir.path());
    let out = run_in(dir.path(), &[
        "train", "--config", cfg.to_str().unwrap(), "--data", corpus.to_str().unwrap(), "--out", "run",
    ]);
    assert_code(&out, 0);
    std::fs::write(dir.path().join("labels.json"), r#"[{"onehot":[1.0,0.0]}]"#).unwrap();
    let out = run_in(dir.path(), &[
        "synth", "--ckpt", "run/ckpt_step10.tsck", "--labels", "labels.json", "--n", "2", "--out", "x.tsw",
    ]);
    assert_code(&out, 2);
}

#[test]
fn eval_self_comparison_and_grid_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = gen_small_corpus(dir.path());
    let out = run_in(dir.path(), &[
        "eval", "--real", corpus.to_str().unwrap(), "--synth", corpus.to_str().unwrap(),
        "--report", "rep.json", "--max-windows", "16",
    ]);
    assert_code(&out, 0);
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("rep.json")).unwrap()).unwrap();
    assert_eq!(rep["mean"]["inter"], serde_json::Value::from(0.0));
    for key in ["intra_a", "intra_b", "inter", "pairwise_mean", "grid", "mean_a", "mean_b"] {
        assert!(rep["per_channel"][0].get(key).is_some(), "missing {key}");
    }

    // a corpus with a different window length cannot be compared
    let out = run_in(dir.path(), &["gen-data", "--out", "other.tsw", "--n", "30", "--t", "128", "--d", "2"]);
    assert_code(&out, 0);
    let out = run_in(dir.path(), &[
        "eval", "--real", corpus.to_str().unwrap(), "--synth", "other.tsw", "--report", "x.json",
    ]);
    assert_code(&out, 2);
}

#[test]
fn spectra_layout_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    // single-run corpus: 100 windows of one run via ingest
    let raw = dir.path().join("raw");
    std::fs::create_dir(&raw).unwrap();
    write_run_csv(&raw.join("only.csv"), 100 * 32, 0);
    let out = run_in(dir.path(), &["ingest", "--dir", "raw", "--window", "32", "--out", "one.tsw"]);
    assert_code(&out, 0);
    for name in ["sp1.csv", "sp2.csv"] {
        let out = run_in(dir.path(), &["spectra", "--data", "one.tsw", "--count", "10", "--out", name]);
        assert_code(&out, 0);
    }
    let text = std::fs::read_to_string(dir.path().join("sp1.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 32 / 2 + 2, "header plus one row per frequency bin");
    // evenly spaced picks: windows 0, 11, 22, ... by start index
    let header = lines[0];
    assert!(header.starts_with("freq,only@0/ch0"), "{header}");
    assert!(header.contains("only@352/ch0"), "{header}"); // start 11 * 32
    assert_eq!(header.split(',').count(), 1 + 10 * 2, "freq plus one column per window channel");
    assert_eq!(
        std::fs::read(dir.path().join("sp1.csv")).unwrap(),
        std::fs::read(dir.path().join("sp2.csv")).unwrap()
    );

    // more windows than the run holds
    let out = run_in(dir.path(), &["spectra", "--data", "one.tsw", "--count", "101", "--out", "x.csv"]);
    assert_code(&out, 1);
}
