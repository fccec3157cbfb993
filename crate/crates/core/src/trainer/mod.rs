//! Adversarial training: one discriminator update followed by two
//! generator-and-conditioner updates per iteration, one-sided label
//! smoothing, feature matching, metrics and checkpoints.

mod checkpoint;
mod config;
mod losses;
mod metrics;
mod run;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::TrainConfig;
pub use losses::{d_loss_graph, g_loss_graph, noise, Batch, BatchVars, DLossVars, GLossTerms, GLossVars};
pub use metrics::{MetricRow, MetricsLog, StepKind};
pub use run::{least_squares_slope, train, TrainOutputs, Trainer};

use crate::dataset::DatasetError;
use crate::models::ModelError;
use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DatasetError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { iteration: u64, what: String },
    #[error("metrics log: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Contract(String),
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        TrainError::Model(ModelError::Tensor(e))
    }
}

pub type Result<T> = std::result::Result<T, TrainError>;
