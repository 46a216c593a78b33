use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{EvalError, TaskTrajectory, TrajectoryKind};
use crate::cable::{joints_to_cables, CableRouting};
use crate::compensate::CalibratedController;
use crate::dataset::{interpolate, DEFAULT_STEP_DEG};
use crate::kinematics::{forward_kinematics, rotation_angle, JointConfig, ManipulatorSpec};
use crate::plant::{HysteresisPlant, HysteresisPlantParams};
use crate::stats::mean_sd;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackMode {
    Uncalibrated,
    Calibrated,
}

impl TrackMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrackMode::Uncalibrated => "uncalibrated",
            TrackMode::Calibrated => "calibrated",
        }
    }
}

impl std::str::FromStr for TrackMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "uncalibrated" => Ok(TrackMode::Uncalibrated),
            "calibrated" => Ok(TrackMode::Calibrated),
            other => Err(format!("unknown mode `{other}` (uncalibrated | calibrated)")),
        }
    }
}

/// Geodesic angle (deg) between two orientations.
pub fn orientation_error_deg(desired: &Matrix3<f64>, achieved: &Matrix3<f64>) -> f64 {
    rotation_angle(&(desired.transpose() * achieved)).to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub repeat: usize,
    pub step: usize,
    pub desired: JointConfig,
    pub command: JointConfig,
    pub physical: JointConfig,
    /// achieved minus desired position (mm)
    pub position_error: [f64; 3],
    pub orientation_error: f64,
}

impl StepRecord {
    pub fn position_error_norm(&self) -> f64 {
        self.position_error.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn joint_error(&self, j: usize) -> f64 {
        (self.physical[j] - self.desired[j]).abs()
    }
}

/// MAE and SD over every scored step of every repeat. SDs are population
/// SDs of the absolute errors.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingReport {
    pub kind: TrajectoryKind,
    pub mode: TrackMode,
    pub runs: usize,
    pub axis_mae: [f64; 3],
    pub position_mae: f64,
    pub position_sd: f64,
    pub orientation_mae: f64,
    pub orientation_sd: f64,
    pub joint_mae: [f64; 5],
    pub joint_sd: [f64; 5],
    pub records: Vec<StepRecord>,
}

impl TrackingReport {
    pub fn from_records(kind: TrajectoryKind, mode: TrackMode, runs: usize, records: Vec<StepRecord>) -> Self {
        let col = |f: &dyn Fn(&StepRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
        let axis_mae = std::array::from_fn(|a| mean_sd(&col(&|r| r.position_error[a].abs())).0);
        let (position_mae, position_sd) = mean_sd(&col(&|r| r.position_error_norm()));
        let (orientation_mae, orientation_sd) = mean_sd(&col(&|r| r.orientation_error));
        let joint = |j: usize| mean_sd(&col(&|r| r.joint_error(j)));
        Self {
            kind,
            mode,
            runs,
            axis_mae,
            position_mae,
            position_sd,
            orientation_mae,
            orientation_sd,
            joint_mae: std::array::from_fn(|j| joint(j).0),
            joint_sd: std::array::from_fn(|j| joint(j).1),
            records,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Runs the trajectory `repeats` times in a row on a fresh plant. An
/// unscored lead-in moves from the zero configuration to the first target,
/// and unscored transitions return to it between repeats; both are sampled
/// at the dataset interpolation step.
pub fn track(
    trajectory: &TaskTrajectory,
    controller: &mut CalibratedController,
    plant_params: &HysteresisPlantParams,
    repeats: usize,
    spec: &ManipulatorSpec,
    routing: &CableRouting,
) -> Result<TrackingReport, EvalError> {
    if trajectory.is_empty() || repeats == 0 {
        return Err(EvalError::InvalidParams("need a non-empty trajectory and ≥ 1 repeat".into()));
    }
    let mode = if controller.bypass { TrackMode::Uncalibrated } else { TrackMode::Calibrated };
    let mut plant = HysteresisPlant::new(plant_params.clone());
    controller.reset();
    let mut records = Vec::with_capacity(repeats * trajectory.len());
    let mut at = JointConfig::ZERO;
    let mut step = 0;

    let abort = |step: usize, reason: String, records: Vec<StepRecord>, runs: usize| EvalError::Aborted {
        step,
        reason,
        partial: Box::new(TrackingReport::from_records(trajectory.kind, mode, runs, records)),
    };

    for repeat in 0..repeats {
        let lead = interpolate(&[at, trajectory.joints[0]], DEFAULT_STEP_DEG)
            .map_err(|e| abort(step, e.to_string(), records.clone(), repeat))?;
        for q in &lead[1..lead.len().saturating_sub(1)] {
            let cmd = controller.calibrated_step(*q);
            plant.step(&cmd);
        }
        for (i, (q_des, target)) in trajectory.joints.iter().zip(&trajectory.targets).enumerate() {
            let cmd = controller.calibrated_step(*q_des);
            if let Err(e) = joints_to_cables(&cmd, spec, routing) {
                return Err(abort(step, e.to_string(), records, repeat));
            }
            let phy = plant.step(&cmd);
            if !phy.is_finite() {
                return Err(abort(step, "non-finite plant output".into(), records, repeat));
            }
            let pose = forward_kinematics(&phy, spec);
            let dp = pose.translation - target.translation;
            records.push(StepRecord {
                repeat,
                step: i,
                desired: *q_des,
                command: cmd,
                physical: phy,
                position_error: [dp.x, dp.y, dp.z],
                orientation_error: orientation_error_deg(&target.rotation, &pose.rotation),
            });
            step += 1;
        }
        at = *trajectory.joints.last().expect("non-empty trajectory");
    }
    Ok(TrackingReport::from_records(trajectory.kind, mode, repeats, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{make_trajectory, TrajectoryParams};
    use crate::kinematics::rot_x;
    use crate::rng::stream;
    use std::f64::consts::PI;

    #[test]
    fn orientation_error_extremes() {
        let r = rot_x(0.3) * crate::kinematics::rot_y(-1.1);
        assert_eq!(orientation_error_deg(&r, &r), 0.0);
        assert!((orientation_error_deg(&r, &(r * rot_x(PI))) - 180.0).abs() < 1e-6);
    }

    fn small_trajectory(kind: TrajectoryKind) -> TaskTrajectory {
        let p = TrajectoryParams { samples: 40, ..TrajectoryParams::default() };
        make_trajectory(kind, &p, &ManipulatorSpec::default(), &[], &mut stream(11, kind.as_str())).unwrap()
    }

    #[test]
    fn identity_plant_tracks_perfectly() {
        let spec = ManipulatorSpec::default();
        let t = small_trajectory(TrajectoryKind::Zigzag);
        let mut ctl = CalibratedController::uncalibrated(80);
        let rep = track(&t, &mut ctl, &HysteresisPlantParams::identity(), 2, &spec, &CableRouting::default()).unwrap();
        assert_eq!(rep.records.len(), 80);
        assert!(rep.position_mae < 0.01);
        assert!(rep.orientation_mae < 1e-3);
    }

    #[test]
    fn shipping_plant_errs_by_millimetres() {
        let spec = ManipulatorSpec::default();
        let t = small_trajectory(TrajectoryKind::Circle);
        let mut ctl = CalibratedController::uncalibrated(80);
        let rep = track(&t, &mut ctl, &HysteresisPlantParams::shipping(), 2, &spec, &CableRouting::default()).unwrap();
        assert!(rep.position_mae > 0.5, "{}", rep.position_mae);
        assert!(rep.joint_mae.iter().all(|m| *m > 0.1));
    }

    #[test]
    fn sd_matches_two_pass_reference() {
        let spec = ManipulatorSpec::default();
        let t = small_trajectory(TrajectoryKind::Random);
        let mut ctl = CalibratedController::uncalibrated(80);
        let rep = track(&t, &mut ctl, &HysteresisPlantParams::shipping(), 3, &spec, &CableRouting::default()).unwrap();
        let e: Vec<f64> = rep.records.iter().map(|r| r.position_error_norm()).collect();
        let n = e.len() as f64;
        let mean = e.iter().sum::<f64>() / n;
        let sd = (e.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
        assert!((rep.position_mae - mean).abs() < 1e-9);
        assert!((rep.position_sd - sd).abs() < 1e-9);
        // the total error dominates every axis component
        for a in 0..3 {
            assert!(rep.axis_mae[a] <= rep.position_mae + 1e-12);
        }
        let sq: f64 = rep.axis_mae.iter().map(|m| m * m).sum();
        assert!(rep.position_mae <= rep.axis_mae.iter().sum::<f64>() + 1e-12);
        assert!(rep.position_mae + 1e-12 >= sq.sqrt());
    }
}
