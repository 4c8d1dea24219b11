//! Conditional generator, dual-head critic, gradient-penalty losses, and the
//! adversarial training loop.

pub mod adam;
pub mod critic;
pub mod generator;
pub mod label;
pub mod loss;
pub mod train;

use std::fmt;

pub use adam::{adam_step, AdamConfig};
pub use critic::{CriticConfig, CriticWeights};
pub use generator::{stage_plan, GeneratorConfig, GeneratorWeights, StageSpec, Upscale};
pub use label::smooth_labels;
pub use loss::{critic_loss, generator_loss, gradient_penalty, weighted_label_mse, LossConfig};
pub use train::{synthesize, StepStats, TrainState, TrainingSet};

use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq)]
pub enum GanError {
    /// A configuration violates its invariants.
    Config { detail: String },
    /// A label's dimension does not match the configured label width.
    LabelDim { want: usize, got: usize },
    /// A loss became non-finite; training aborts with the failing step.
    NanLoss { step: u64 },
    Tensor(TensorError),
}

impl fmt::Display for GanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config { detail } => write!(f, "invalid configuration: {detail}"),
            Self::LabelDim { want, got } => write!(f, "label dimension {got}, expected {want}"),
            Self::NanLoss { step } => write!(f, "non-finite loss at step {step}"),
            Self::Tensor(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for GanError {}

impl From<TensorError> for GanError {
    fn from(e: TensorError) -> Self {
        Self::Tensor(e)
    }
}
