//! Command-line surface for the time-series augmentation pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric abort.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tsaug::gan::GanError;
use tsaug::harness::HarnessError;

#[derive(Parser)]
#[command(name = "tsaug", version, about = "Transformer GAN for time-series augmentation with spectral evaluation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the balanced compound-sine artificial corpus.
    GenData {
        #[arg(long)]
        out: PathBuf,
        /// Total windows; must divide evenly over the 3 classes.
        #[arg(long, default_value_t = 50_000)]
        n: usize,
        /// Window length in time steps (power of two).
        #[arg(long, default_value_t = 64)]
        t: usize,
        /// Channels per window.
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Ingest per-run accelerometer CSVs into a windowed corpus.
    Ingest {
        /// Directory of `<run>.csv` files or `<run>/` directories of parts.
        #[arg(long)]
        dir: PathBuf,
        /// Window length in time steps (power of two).
        #[arg(long, default_value_t = 256)]
        window: usize,
        /// Window offset step; defaults to the window length (tiling).
        #[arg(long)]
        stride: Option<usize>,
        /// Zero-based channel column indices within each CSV row.
        #[arg(long, default_value = "4,5", value_delimiter = ',')]
        columns: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Train the conditional GAN on a corpus.
    Train {
        /// TOML run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        data: PathBuf,
        /// Output directory for checkpoints and the metrics log.
        #[arg(long)]
        out: PathBuf,
        /// Resume from a checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Sample windows from a trained generator.
    Synth {
        #[arg(long)]
        ckpt: PathBuf,
        /// JSON list of conditioning labels.
        #[arg(long)]
        labels: PathBuf,
        /// Windows per label.
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Corpus whose train-subset normalization is inverted on the output;
        /// identity when omitted.
        #[arg(long)]
        norm_from: Option<PathBuf>,
    },
    /// Spectral set-vs-set comparison of two corpora.
    Eval {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synth: PathBuf,
        /// Output JSON report path.
        #[arg(long)]
        report: PathBuf,
        /// Cap per side for the quadratic pairwise term (evenly spaced
        /// subsample above this).
        #[arg(long, default_value_t = 512)]
        max_windows: usize,
    },
    /// Export spectra of evenly spaced windows per run as CSV.
    Spectra {
        #[arg(long)]
        data: PathBuf,
        /// Windows per run.
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code_for(err: &HarnessError) -> u8 {
    match err {
        HarnessError::Usage { .. } => 1,
        HarnessError::Data(_) | HarnessError::Spectral(_) => 2,
        HarnessError::NumericAbort { .. } => 3,
        HarnessError::Gan(g) => match g {
            GanError::Config { .. } => 1,
            GanError::NanLoss { .. } => 3,
            GanError::LabelDim { .. } | GanError::Tensor(_) => 2,
        },
    }
}

fn run(cli: Cli) -> commands::CmdResult {
    match cli.cmd {
        Cmd::GenData { out, n, t, d, seed } => commands::gen_data(&out, n, t, d, seed),
        Cmd::Ingest { dir, window, stride, columns, out, seed } => {
            let stride = stride.unwrap_or(window);
            commands::ingest(&dir, window, stride, &columns, &out, seed)
        }
        Cmd::Train { config, data, out, resume } => {
            commands::train(config.as_deref(), &data, &out, resume.as_deref())
        }
        Cmd::Synth { ckpt, labels, n, out, seed, norm_from } => {
            commands::synth(&ckpt, &labels, n, &out, seed, norm_from.as_deref())
        }
        Cmd::Eval { real, synth, report, max_windows } => {
            commands::eval(&real, &synth, &report, max_windows)
        }
        Cmd::Spectra { data, count, out } => commands::spectra(&data, count, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's help/version "errors" are successful exits
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
