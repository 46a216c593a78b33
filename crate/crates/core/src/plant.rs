//! Stateful synthetic manipulator: commanded joint angles in, physical joint
//! angles out, through cross-coupling, a dead zone, a backlash (play)
//! operator, a gain, slow drift, and sensor-like noise.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::JointConfig;
use crate::rng::{self, StreamRng};

/// Per-joint command-vs-physical MAE reported for the hardware dataset (deg).
pub const REFERENCE_MAE: [f64; 5] = [16.31, 10.09, 11.21, 12.02, 13.84];
/// Matching standard deviations (deg).
pub const REFERENCE_SD: [f64; 5] = [11.59, 7.67, 7.56, 8.91, 10.37];

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("invalid plant parameters: {0}")]
    InvalidParams(String),
    #[error("trace I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HysteresisPlantParams {
    /// play-operator band width per joint (deg)
    pub backlash: [f64; 5],
    /// dead-zone half width per joint (deg)
    pub dead_zone: [f64; 5],
    /// output gain per joint
    pub gain: [f64; 5],
    /// row i mixes commanded joints into joint i; unit diagonal
    pub coupling: [[f64; 5]; 5],
    /// deg per 1000 steps
    pub drift_rate: f64,
    /// Gaussian noise SD (deg)
    pub noise: f64,
    pub seed: u64,
}

impl Default for HysteresisPlantParams {
    fn default() -> Self {
        Self::shipping()
    }
}

const IDENTITY5: [[f64; 5]; 5] = [
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0],
];

impl HysteresisPlantParams {
    /// Physical angles equal commanded angles exactly.
    pub fn identity() -> Self {
        Self {
            backlash: [0.0; 5],
            dead_zone: [0.0; 5],
            gain: [1.0; 5],
            coupling: IDENTITY5,
            drift_rate: 0.0,
            noise: 0.0,
            seed: 42,
        }
    }

    /// Defaults calibrated so that a random dataset-style command sequence
    /// lands near the reference per-joint MAE.
    pub fn shipping() -> Self {
        let mut coupling = IDENTITY5;
        coupling[1][0] = 0.05;
        coupling[2][0] = 0.3;
        coupling[2][1] = 0.25;
        coupling[3][1] = 0.1;
        coupling[4][1] = 0.1;
        coupling[3][4] = 0.08;
        coupling[4][3] = 0.08;
        Self {
            backlash: [16.0, 10.0, 8.0, 12.0, 14.0],
            dead_zone: [1.5; 5],
            gain: [0.55, 0.65, 1.35, 0.78, 0.75],
            coupling,
            drift_rate: 0.3,
            noise: 0.3,
            seed: 42,
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self { seed: self.seed, ..Self::identity() }
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let bad = |m: String| Err(PlantError::InvalidParams(m));
        for j in 0..5 {
            if !(self.backlash[j] >= 0.0) || !(self.dead_zone[j] >= 0.0) {
                return bad(format!("joint {} backlash and dead zone must be ≥ 0", j + 1));
            }
            if !(0.5..=1.5).contains(&self.gain[j]) {
                return bad(format!("joint {} gain {} outside [0.5, 1.5]", j + 1, self.gain[j]));
            }
            for i in 0..5 {
                let c = self.coupling[j][i];
                if i == j && c != 1.0 {
                    return bad(format!("coupling diagonal C[{j}][{j}] must be 1"));
                }
                if i != j && !(c.abs() <= 0.3) {
                    return bad(format!("coupling C[{j}][{i}] = {c} exceeds 0.3"));
                }
            }
        }
        if !(self.noise >= 0.0) || !self.drift_rate.is_finite() {
            return bad("noise must be ≥ 0 and drift finite".into());
        }
        Ok(())
    }

    /// Stable fingerprint used in dataset metadata.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("params serialize");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }
}

/// Classical play operator: the output follows the input once the input has
/// moved more than half the band away, and holds otherwise.
pub fn play(memory: f64, input: f64, band: f64) -> f64 {
    let r = 0.5 * band;
    memory.clamp(input - r, input + r)
}

pub fn dead_zone(x: f64, width: f64) -> f64 {
    if x > width {
        x - width
    } else if x < -width {
        x + width
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct HysteresisPlantState {
    /// play-operator output per joint (deg)
    pub play: [f64; 5],
    pub step: u64,
    pub drift: [f64; 5],
    drift_dir: [f64; 5],
    rng: StreamRng,
}

impl HysteresisPlantState {
    pub fn new(params: &HysteresisPlantParams) -> Self {
        let mut rng = rng::stream(params.seed, "plant");
        let drift_dir = std::array::from_fn(|_| if rng.random::<bool>() { 1.0 } else { -1.0 });
        Self { play: [0.0; 5], step: 0, drift: [0.0; 5], drift_dir, rng }
    }
}

/// Noise-free, drift-free part of one step; advances `play` in place.
pub fn deterministic_step(play_mem: &mut [f64; 5], q_cmd: &JointConfig, params: &HysteresisPlantParams) -> JointConfig {
    let mut out = JointConfig::ZERO;
    for j in 0..5 {
        let mixed: f64 = (0..5).map(|i| params.coupling[j][i] * q_cmd[i]).sum();
        let x = dead_zone(mixed, params.dead_zone[j]);
        play_mem[j] = play(play_mem[j], x, params.backlash[j]);
        out[j] = params.gain[j] * play_mem[j];
    }
    out
}

/// One plant step. Deterministic for a fixed seed and command sequence.
pub fn plant_step(state: &mut HysteresisPlantState, q_cmd: &JointConfig, params: &HysteresisPlantParams) -> JointConfig {
    let mut q = deterministic_step(&mut state.play, q_cmd, params);
    let per_step = params.drift_rate / 1000.0;
    let normal = (params.noise > 0.0).then(|| Normal::new(0.0, params.noise).expect("σ ≥ 0"));
    for j in 0..5 {
        state.drift[j] += per_step * state.drift_dir[j];
        q[j] += state.drift[j];
        if let Some(n) = &normal {
            q[j] += n.sample(&mut state.rng);
        }
    }
    state.step += 1;
    q
}

/// Plant instance owning its parameters and state.
#[derive(Debug, Clone)]
pub struct HysteresisPlant {
    pub params: HysteresisPlantParams,
    pub state: HysteresisPlantState,
}

impl HysteresisPlant {
    pub fn new(params: HysteresisPlantParams) -> Self {
        let state = HysteresisPlantState::new(&params);
        Self { params, state }
    }

    pub fn step(&mut self, q_cmd: &JointConfig) -> JointConfig {
        plant_step(&mut self.state, q_cmd, &self.params)
    }

    pub fn run(&mut self, commands: &[JointConfig]) -> Vec<JointConfig> {
        commands.iter().map(|q| self.step(q)).collect()
    }

    pub fn reset(&mut self) {
        self.state = HysteresisPlantState::new(&self.params);
    }
}

/// Runs only the deterministic core from a fresh state over `commands` and
/// returns the final output. Useful as an exact forward model.
pub fn replay_deterministic(commands: &[JointConfig], params: &HysteresisPlantParams) -> JointConfig {
    let mut mem = [0.0; 5];
    let mut last = JointConfig::ZERO;
    for q in commands {
        last = deterministic_step(&mut mem, q, params);
    }
    last
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub steps: usize,
    /// per-joint mean |q_phy − q_cmd| (deg)
    pub mae: [f64; 5],
    /// per-joint SD of |q_phy − q_cmd| (deg)
    pub sd: [f64; 5],
    pub reference_mae: [f64; 5],
    /// MAE within ±50% of the reference
    pub within_band: [bool; 5],
}

pub fn error_stats(cmd: &[JointConfig], phy: &[JointConfig]) -> ([f64; 5], [f64; 5]) {
    let n = cmd.len().min(phy.len());
    let mut mae = [0.0; 5];
    let mut sd = [0.0; 5];
    if n == 0 {
        return (mae, sd);
    }
    for j in 0..5 {
        let errs: Vec<f64> = (0..n).map(|t| (phy[t][j] - cmd[t][j]).abs()).collect();
        let (m, s) = crate::stats::mean_sd(&errs);
        mae[j] = m;
        sd[j] = s;
    }
    (mae, sd)
}

/// Drives a fresh plant through `commands` and compares its hysteresis
/// statistics with the reference table.
pub fn calibrate_plant(params: &HysteresisPlantParams, commands: &[JointConfig]) -> CalibrationReport {
    let mut plant = HysteresisPlant::new(params.clone());
    let phy = plant.run(commands);
    let (mae, sd) = error_stats(commands, &phy);
    let within_band = std::array::from_fn(|j| (mae[j] - REFERENCE_MAE[j]).abs() <= 0.5 * REFERENCE_MAE[j]);
    CalibrationReport { steps: commands.len(), mae, sd, reference_mae: REFERENCE_MAE, within_band }
}

/// Writes `step,q1_cmd..q5_cmd,q1_phy..q5_phy`.
pub fn write_trace(path: &Path, cmd: &[JointConfig], phy: &[JointConfig]) -> Result<(), PlantError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "step,q1_cmd,q2_cmd,q3_cmd,q4_cmd,q5_cmd,q1_phy,q2_phy,q3_phy,q4_phy,q5_phy")?;
    for (t, (c, p)) in cmd.iter().zip(phy).enumerate() {
        write!(f, "{t}")?;
        for v in c.0.iter().chain(p.0.iter()) {
            write!(f, ",{v}")?;
        }
        writeln!(f)?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(from: f64, to: f64, step: f64) -> Vec<f64> {
        let n = ((to - from).abs() / step).round() as usize;
        (0..=n).map(|i| from + (to - from) * i as f64 / n as f64).collect()
    }

    #[test]
    fn identity_plant_passes_commands_through() {
        let params = HysteresisPlantParams::identity();
        let mut plant = HysteresisPlant::new(params);
        for q in [JointConfig::new(1.0, -2.0, 3.0, -4.0, 5.0), JointConfig::new(-30.0, 10.0, 0.0, 7.5, 8.0)] {
            assert_eq!(plant.step(&q), q);
        }
    }

    #[test]
    fn ramp_branches_are_one_band_apart() {
        let mut params = HysteresisPlantParams::identity();
        params.backlash[0] = 4.0;
        let mut plant = HysteresisPlant::new(params);
        let up = ramp(-20.0, 20.0, 0.5);
        let down = ramp(20.0, -20.0, 0.5);
        let mut asc = std::collections::HashMap::new();
        for x in &up {
            let y = plant.step(&JointConfig::new(*x, 0.0, 0.0, 0.0, 0.0));
            asc.insert((x * 2.0).round() as i64, y[0]);
        }
        for x in &down {
            let y = plant.step(&JointConfig::new(*x, 0.0, 0.0, 0.0, 0.0));
            // flat region: both branches engaged
            if x.abs() <= 10.0 {
                let a = asc[&((x * 2.0).round() as i64)];
                assert!((a - y[0] - (-4.0)).abs() < 1e-12, "x={x} asc={a} desc={}", y[0]);
            }
        }
    }

    #[test]
    fn seeded_runs_are_bitwise_identical() {
        let params = HysteresisPlantParams::shipping();
        let cmds: Vec<JointConfig> =
            (0..200).map(|t| JointConfig::new((t as f64 * 0.1).sin() * 30.0, 5.0, -3.0, -10.0, 10.0)).collect();
        let a = HysteresisPlant::new(params.clone()).run(&cmds);
        let b = HysteresisPlant::new(params).run(&cmds);
        assert_eq!(a, b);
    }

    #[test]
    fn identity_calibration_is_zero() {
        let cmds: Vec<JointConfig> = (0..100).map(|t| JointConfig::new(t as f64 * 0.3, 0.0, 0.0, 0.0, 0.0)).collect();
        let rep = calibrate_plant(&HysteresisPlantParams::identity(), &cmds);
        assert_eq!(rep.mae, [0.0; 5]);
    }

    #[test]
    fn backlash_alone_leaves_spread_on_reversals() {
        let mut params = HysteresisPlantParams::identity();
        params.backlash = [6.0; 5];
        let mut cmds = Vec::new();
        for x in ramp(0.0, 20.0, 1.0).into_iter().chain(ramp(20.0, -10.0, 1.0)).chain(ramp(-10.0, 15.0, 1.0)) {
            cmds.push(JointConfig([x; 5]));
        }
        let rep = calibrate_plant(&params, &cmds);
        for j in 0..5 {
            assert!(rep.sd[j] > 0.0);
            assert!(rep.mae[j] > 0.0 && rep.mae[j] <= 3.0 + 1e-12);
        }
    }

    #[test]
    fn shipping_params_validate() {
        HysteresisPlantParams::shipping().validate().unwrap();
        HysteresisPlantParams::identity().validate().unwrap();
        let mut bad = HysteresisPlantParams::shipping();
        bad.coupling[0][1] = 0.5;
        assert!(bad.validate().is_err());
        let mut bad = HysteresisPlantParams::shipping();
        bad.gain[2] = 2.0;
        assert!(bad.validate().is_err());
    }

    fn params_strategy() -> impl Strategy<Value = HysteresisPlantParams> {
        (
            prop::array::uniform5(0.0..10.0f64),
            prop::array::uniform5(0.0..3.0f64),
            prop::array::uniform5(0.5..1.5f64),
            prop::array::uniform5(prop::array::uniform5(-0.3..0.3f64)),
        )
            .prop_map(|(backlash, dead_zone, gain, mut coupling)| {
                for (j, row) in coupling.iter_mut().enumerate() {
                    row[j] = 1.0;
                }
                HysteresisPlantParams { backlash, dead_zone, gain, coupling, drift_rate: 0.0, noise: 0.0, seed: 1 }
            })
    }

    proptest! {
        #[test]
        fn core_is_rate_independent(params in params_strategy(), xs in prop::collection::vec(prop::array::uniform5(-40.0..40.0f64), 1..60)) {
            let cmds: Vec<JointConfig> = xs.into_iter().map(JointConfig).collect();
            let doubled: Vec<JointConfig> = cmds.iter().flat_map(|q| [*q, *q]).collect();
            let a = HysteresisPlant::new(params.clone()).run(&cmds);
            let b = HysteresisPlant::new(params).run(&doubled);
            for (t, qa) in a.iter().enumerate() {
                prop_assert_eq!(*qa, b[2 * t]);
                prop_assert_eq!(*qa, b[2 * t + 1]);
            }
        }

        #[test]
        fn deviation_stays_bounded(params in params_strategy(), xs in prop::collection::vec(prop::array::uniform5(-40.0..40.0f64), 1..60)) {
            let cmds: Vec<JointConfig> = xs.into_iter().map(JointConfig).collect();
            let out = HysteresisPlant::new(params.clone()).run(&cmds);
            for (q, y) in cmds.iter().zip(&out) {
                for j in 0..5 {
                    let mixed: f64 = (0..5).map(|i| params.coupling[j][i] * q[i]).sum();
                    let bound = params.gain[j] * (params.backlash[j] / 2.0 + params.dead_zone[j]);
                    prop_assert!((y[j] - params.gain[j] * mixed).abs() <= bound + 1e-9);
                }
            }
        }
    }
}
