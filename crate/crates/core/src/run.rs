//! End-to-end pipeline steps driven by a [`RunConfig`]: collection,
//! training, the window-length study and tracking. Every random draw comes
//! from a named stream of the global seed.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::compensate::CalibratedController;
use crate::config::{ConfigError, RunConfig};
use crate::dataset::{self, DatasetError, HysteresisDataset, PerceptionStage};
use crate::eval::{self, EvalError, TaskTrajectory, TrackMode, TrackingReport, TrajectoryKind};
use crate::kinematics::JointConfig;
use crate::learn::{self, Direction, LearnError, Model, ModelCheckpoint, SweepReport, TrainOutcome};
use crate::plant::HysteresisPlant;
use crate::rng::stream;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{what} not found at {}", path.display())]
    Missing { what: &'static str, path: PathBuf },
    #[error("I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Default artifact locations under the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset.csv")
    }

    pub fn checkpoint(&self, direction: Direction) -> PathBuf {
        self.root.join(format!("model_{}.json", direction.as_str()))
    }

    pub fn sweep_runs(&self) -> PathBuf {
        self.root.join("sweep_runs.csv")
    }

    pub fn sweep_summary(&self) -> PathBuf {
        self.root.join("sweep_summary.csv")
    }

    pub fn track_dir(&self) -> PathBuf {
        self.root.join("track")
    }
}

/// The random waypoints the collection trajectory visits.
pub fn training_waypoints(cfg: &RunConfig) -> Vec<JointConfig> {
    dataset::random_waypoints(cfg.dataset.waypoints, &cfg.manipulator, cfg.dataset.margin, &mut stream(cfg.seed, "waypoints"))
}

/// Drives a fresh plant through the interpolated waypoint trajectory.
pub fn collect_dataset(cfg: &RunConfig) -> Result<HysteresisDataset, RunError> {
    let waypoints = training_waypoints(cfg);
    let trajectory = dataset::interpolate(&waypoints, cfg.dataset.step_deg)?;
    let mut plant = HysteresisPlant::new(cfg.plant_params());
    let stage = PerceptionStage { spec: &cfg.manipulator, rig: &cfg.rig, config: &cfg.perception };
    let sensing = cfg.dataset.perception.then_some(&stage);
    let mut data = dataset::collect(&trajectory, &mut plant, sensing, &mut stream(cfg.seed, "perception"));
    data.meta.waypoints = waypoints.len();
    data.meta.step_deg = cfg.dataset.step_deg;
    data.meta.config_hash = cfg.dataset_hash();
    Ok(data)
}

pub fn load_dataset(path: &Path) -> Result<HysteresisDataset, RunError> {
    if !path.exists() {
        return Err(RunError::Missing { what: "dataset", path: path.to_path_buf() });
    }
    Ok(dataset::read_dataset(path)?)
}

/// Trains the forward and inverse models on the temporal split.
pub fn train_pair(cfg: &RunConfig, data: &HysteresisDataset) -> Result<(TrainOutcome, TrainOutcome), RunError> {
    let (train, val) = dataset::split(data, cfg.dataset.train_frac)?;
    let model = cfg.model_config();
    let hyper = cfg.train_config();
    let forward = learn::train(&model, Direction::Forward, &train.pairs, &val.pairs, &hyper)?;
    let inverse = learn::train(&model, Direction::Inverse, &train.pairs, &val.pairs, &hyper)?;
    Ok((forward, inverse))
}

/// Window-length study of the forward model over the configured kinds.
pub fn sweep(cfg: &RunConfig, data: &HysteresisDataset) -> Result<SweepReport, RunError> {
    let (train, val) = dataset::split(data, cfg.dataset.train_frac)?;
    let t = &cfg.training;
    Ok(learn::sweep_window_lengths(
        &t.sweep_kinds,
        &t.sweep_lengths,
        t.sweep_repeats,
        Direction::Forward,
        &train.pairs,
        &val.pairs,
        &cfg.train_config(),
    )?)
}

pub fn load_model(path: &Path, direction: Direction) -> Result<Model, RunError> {
    if !path.exists() {
        return Err(RunError::Missing { what: "checkpoint", path: path.to_path_buf() });
    }
    let ckpt = ModelCheckpoint::load(path)?;
    if ckpt.direction != direction {
        return Err(LearnError::Checkpoint(format!(
            "{} holds a {} model, expected {}",
            path.display(),
            ckpt.direction.as_str(),
            direction.as_str()
        ))
        .into());
    }
    Ok(ckpt.model()?)
}

/// Evaluation paths for `kinds`, kept away from the training waypoints.
pub fn trajectories(cfg: &RunConfig, kinds: &[TrajectoryKind]) -> Result<Vec<TaskTrajectory>, RunError> {
    let avoid = training_waypoints(cfg);
    kinds
        .iter()
        .map(|&kind| {
            let mut rng = stream(cfg.seed, &format!("trajectory-{kind}"));
            Ok(eval::make_trajectory(kind, &cfg.eval.trajectory, &cfg.manipulator, &avoid, &mut rng)?)
        })
        .collect()
}

/// Tracks every trajectory in every mode, uncalibrated first. Calibrated
/// mode needs the forward and inverse models.
pub fn track_modes(
    cfg: &RunConfig,
    trajectories: &[TaskTrajectory],
    modes: &[TrackMode],
    models: Option<&(Model, Model)>,
    repeats: usize,
) -> Result<Vec<TrackingReport>, RunError> {
    let plant = cfg.plant_params();
    let mut reports = Vec::new();
    for traj in trajectories {
        for &mode in modes {
            let mut controller = match mode {
                TrackMode::Uncalibrated => CalibratedController::uncalibrated(cfg.compensator.window),
                TrackMode::Calibrated => {
                    let (forward, inverse) = models.ok_or_else(|| RunError::Missing {
                        what: "trained models for calibrated mode",
                        path: PathBuf::from(&cfg.out_dir),
                    })?;
                    CalibratedController::new(Box::new(forward.clone()), Box::new(inverse.clone()), cfg.compensator)
                        .with_limits(cfg.manipulator.clone())
                }
            };
            reports.push(eval::track(traj, &mut controller, &plant, repeats, &cfg.manipulator, &cfg.cables)?);
        }
    }
    Ok(reports)
}
