//! One TOML file describing a whole run, with every section optional and
//! unknown keys rejected. `TENDON_HYST_SEED` overrides the global seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cable::CableRouting;
use crate::compensate::CompensatorConfig;
use crate::dataset::{DEFAULT_STEP_DEG, DESK_SCALE_WAYPOINTS};
use crate::eval::{TrajectoryKind, TrajectoryParams};
use crate::kinematics::ManipulatorSpec;
use crate::learn::{JointScale, ModelConfig, ModelKind, TrainConfig, SWEEP_LENGTHS};
use crate::perception::{MarkerRig, PerceptionConfig};
use crate::plant::HysteresisPlantParams;

pub const SEED_ENV: &str = "TENDON_HYST_SEED";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("writing config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("{SEED_ENV}={0:?} is not an unsigned integer")]
    SeedEnv(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSettings {
    pub waypoints: usize,
    /// waypoints stay this far inside the joint limits (deg)
    pub margin: f64,
    pub step_deg: f64,
    pub train_frac: f64,
    /// label physical angles through the marker pipeline; off reads the
    /// plant directly
    pub perception: bool,
}

impl Default for DatasetSettings {
    fn default() -> Self {
        Self { waypoints: DESK_SCALE_WAYPOINTS, margin: 0.0, step_deg: DEFAULT_STEP_DEG, train_frac: 0.8, perception: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSettings {
    pub kind: ModelKind,
    pub window: usize,
    /// TCN width
    pub channels: usize,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub patience: usize,
    pub sweep_kinds: Vec<ModelKind>,
    pub sweep_lengths: Vec<usize>,
    pub sweep_repeats: usize,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            kind: ModelKind::Tcn,
            window: 80,
            channels: 5,
            lr: t.lr,
            batch: t.batch,
            epochs: t.epochs,
            patience: t.patience,
            sweep_kinds: vec![ModelKind::Fnn, ModelKind::Tcn],
            sweep_lengths: SWEEP_LENGTHS.to_vec(),
            sweep_repeats: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub kinds: Vec<TrajectoryKind>,
    pub repeats: usize,
    pub trajectory: TrajectoryParams,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { kinds: TrajectoryKind::ALL.to_vec(), repeats: 5, trajectory: TrajectoryParams::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// root of every random sub-stream
    pub seed: u64,
    pub out_dir: PathBuf,
    pub manipulator: ManipulatorSpec,
    pub cables: CableRouting,
    /// the plant seed is replaced by the global seed
    pub plant: HysteresisPlantParams,
    pub rig: MarkerRig,
    pub perception: PerceptionConfig,
    pub dataset: DatasetSettings,
    pub training: TrainingSettings,
    pub compensator: CompensatorConfig,
    pub eval: EvalSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            out_dir: PathBuf::from("out"),
            manipulator: ManipulatorSpec::default(),
            cables: CableRouting::default(),
            plant: HysteresisPlantParams::shipping(),
            rig: MarkerRig::default(),
            perception: PerceptionConfig::default(),
            dataset: DatasetSettings::default(),
            training: TrainingSettings::default(),
            compensator: CompensatorConfig::desk(),
            eval: EvalSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Applies `TENDON_HYST_SEED` when it is set.
    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v.trim().parse().map_err(|_| ConfigError::SeedEnv(v.clone()))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        self.manipulator.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.cables.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.plant.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.rig.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.compensator.validate().map_err(ConfigError::Invalid)?;
        self.model_config().validate().map_err(ConfigError::Invalid)?;
        self.eval.trajectory.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let d = &self.dataset;
        if d.waypoints < 2 || !(d.step_deg > 0.0) || !(d.train_frac > 0.0 && d.train_frac < 1.0) || !(d.margin >= 0.0) {
            return bad("dataset needs ≥ 2 waypoints, step > 0, margin ≥ 0 and 0 < train_frac < 1".into());
        }
        if self.training.window != self.compensator.window {
            return bad(format!(
                "training window L = {} differs from compensator window L = {}",
                self.training.window, self.compensator.window
            ));
        }
        if self.training.epochs == 0 || self.training.sweep_repeats == 0 {
            return bad("epochs and sweep repeats must be ≥ 1".into());
        }
        if self.eval.repeats == 0 || self.eval.kinds.is_empty() {
            return bad("eval needs ≥ 1 repeat and ≥ 1 trajectory kind".into());
        }
        Ok(())
    }

    pub fn plant_params(&self) -> HysteresisPlantParams {
        HysteresisPlantParams { seed: self.seed, ..self.plant.clone() }
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            channels: self.training.channels,
            scale: JointScale::from_spec(&self.manipulator),
            ..ModelConfig::of_kind(self.training.kind, self.training.window)
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig { lr: t.lr, batch: t.batch, epochs: t.epochs, patience: t.patience, seed: self.seed }
    }

    /// Hash of everything that shapes the collected data.
    pub fn dataset_hash(&self) -> String {
        let relevant = (self.seed, &self.manipulator, &self.plant, &self.rig, &self.perception, &self.dataset);
        let json = serde_json::to_vec(&relevant).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("sed = 3").is_err());
        assert!(RunConfig::from_toml("[training]\nwindw = 10").is_err());
    }

    #[test]
    fn window_must_match_across_training_and_compensation() {
        let err = RunConfig::from_toml("[training]\nwindow = 10").unwrap_err();
        assert!(err.to_string().contains("L = 10"), "{err}");
        let ok = RunConfig::from_toml("[training]\nwindow = 10\n[compensator]\nwindow = 10").unwrap();
        assert_eq!(ok.model_config().window, 10);
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let cfg = RunConfig::from_toml("seed = 7\n[plant]\nnoise = 0.0").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.plant.noise, 0.0);
        assert_eq!(cfg.plant.backlash, HysteresisPlantParams::shipping().backlash);
        assert_eq!(cfg.plant_params().seed, 7);
    }

    #[test]
    fn dataset_hash_tracks_relevant_fields_only() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.eval.repeats = 9;
        assert_eq!(a.dataset_hash(), b.dataset_hash());
        b.dataset.waypoints += 1;
        assert_ne!(a.dataset_hash(), b.dataset_hash());
    }
}
