//! Task-space tracking evaluation: trajectory generators, closed-loop runs
//! through the plant with or without compensation, and MAE/SD reports.

mod report;
mod track;
mod trajectory;

use thiserror::Error;

pub use report::{improvement, report_emit, render_table, EmitPaths, Improvement};
pub use track::{orientation_error_deg, track, StepRecord, TrackMode, TrackingReport};
pub use trajectory::{make_trajectory, workspace_envelope, TaskTrajectory, TrajectoryKind, TrajectoryParams};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("trajectory sample {sample} unreachable after {attempts} attempts")]
    Unreachable { sample: usize, attempts: usize },
    #[error("invalid trajectory parameters: {0}")]
    InvalidParams(String),
    #[error("tracking aborted at step {step}: {reason}")]
    Aborted { step: usize, reason: String, partial: Box<TrackingReport> },
    #[error("nothing to report")]
    EmptyReport,
    #[error("report I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("report CSV: {0}")]
    Csv(#[from] csv::Error),
}
