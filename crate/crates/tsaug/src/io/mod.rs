//! Run configuration, checkpoints, and the metrics log.

pub mod checkpoint;
pub mod config;
pub mod metrics;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader, ShapeInfo};
pub use config::RunConfig;
pub use metrics::{read_metrics, MetricsRecord, MetricsWriter};
