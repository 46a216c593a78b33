use serde::{Deserialize, Serialize};

use crate::dataset::Pair;
use crate::kinematics::{JointConfig, ManipulatorSpec};

/// `L` consecutive joint configurations, oldest first, left zero-padded when
/// the history is shorter than `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceWindow {
    pub rows: Vec<JointConfig>,
}

impl SequenceWindow {
    /// Window whose last row is `series[t]`.
    pub fn ending_at(series: &[JointConfig], t: usize, len: usize) -> Self {
        assert!(t < series.len(), "window end past the series");
        let start = (t + 1).saturating_sub(len);
        let pad = len - (t + 1 - start);
        let mut rows = vec![JointConfig::ZERO; pad];
        rows.extend_from_slice(&series[start..=t]);
        Self { rows }
    }

    /// Window built from a history (oldest first) plus the current row.
    pub fn from_history(history: &[JointConfig], current: JointConfig, len: usize) -> Self {
        let keep = history.len().min(len - 1);
        let mut rows = vec![JointConfig::ZERO; len - 1 - keep];
        rows.extend_from_slice(&history[history.len() - keep..]);
        rows.push(current);
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> JointConfig {
        *self.rows.last().expect("window has at least one row")
    }

    /// Replaces the newest row.
    pub fn with_last(&self, q: JointConfig) -> Self {
        let mut w = self.clone();
        *w.rows.last_mut().expect("nonempty") = q;
        w
    }
}

/// Per-joint affine map of degrees onto roughly `[−1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointScale {
    pub mid: [f64; 5],
    pub half: [f64; 5],
}

impl JointScale {
    pub fn from_spec(spec: &ManipulatorSpec) -> Self {
        let (mid, half) = spec.joint_scale();
        Self { mid, half }
    }

    pub fn identity() -> Self {
        Self { mid: [0.0; 5], half: [1.0; 5] }
    }

    pub fn normalize(&self, q: &JointConfig) -> [f64; 5] {
        std::array::from_fn(|j| (q[j] - self.mid[j]) / self.half[j])
    }

    pub fn denormalize(&self, v: &[f64]) -> JointConfig {
        JointConfig(std::array::from_fn(|j| v[j] * self.half[j] + self.mid[j]))
    }
}

/// Which way a model maps the joint streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// command history → physical angle
    Forward,
    /// physical history → command angle
    Inverse,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Inverse => "inverse",
        }
    }
}

/// Normalized training samples stored contiguously: `inputs` is
/// `[n, len, 5]`, `targets` is `[n, 5]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub len: usize,
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Samples {
    pub fn count(&self) -> usize {
        self.targets.len() / 5
    }

    pub fn input(&self, i: usize) -> &[f64] {
        let w = self.len * 5;
        &self.inputs[i * w..(i + 1) * w]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * 5..(i + 1) * 5]
    }
}

/// One sample per pair: the window of the source stream ending at `t` and
/// the other stream's value at `t`. Windows never reach outside `pairs`.
/// Dropped frames yield no sample but stay in the windows of later ones.
pub fn build_samples(pairs: &[Pair], direction: Direction, len: usize, scale: &JointScale) -> Samples {
    let (src, dst): (Vec<JointConfig>, Vec<JointConfig>) = match direction {
        Direction::Forward => pairs.iter().map(|p| (p.cmd, p.phy)).unzip(),
        Direction::Inverse => pairs.iter().map(|p| (p.phy, p.cmd)).unzip(),
    };
    let mut inputs = Vec::with_capacity(pairs.len() * len * 5);
    let mut targets = Vec::with_capacity(pairs.len() * 5);
    for t in (0..pairs.len()).filter(|&t| pairs[t].valid) {
        let w = SequenceWindow::ending_at(&src, t, len);
        for row in &w.rows {
            inputs.extend(scale.normalize(row));
        }
        targets.extend(scale.normalize(&dst[t]));
    }
    Samples { len, inputs, targets }
}
