//! Reverse-mode autodiff, FNN and TCN sequence models, Adam training,
//! checkpoints, and the window-length study.

mod models;
mod sweep;
pub mod tape;
mod train;
mod window;

use thiserror::Error;

pub use models::{tcn_num_blocks, tcn_receptive_field, Model, ModelConfig, ModelKind};
pub use sweep::{sweep_window_lengths, write_sweep_csv, SweepCell, SweepReport, SweepRow, SWEEP_LENGTHS};
pub use train::{
    constant_mean_rmse, loss_and_grad, rmse_deg, train, Adam, ModelCheckpoint, TrainConfig, TrainOutcome,
    TrainingMeta,
};
pub use window::{build_samples, Direction, JointScale, Samples, SequenceWindow};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid model or training config: {0}")]
    Config(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("learn I/O: {0}")]
    Io(#[from] std::io::Error),
}
