use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use super::hinge::FlexureHingeParams;
use super::KinematicsError;

/// Bend a single flexure hinge is designed for (deg).
pub const HINGE_BEND_DEG: f64 = 5.5;

pub const JOINT_NAMES: [&str; 5] = ["q1", "q2", "q3", "q4", "q5"];

/// Five joint angles in degrees: segment-1 pitch, segment-1 yaw, segment-2
/// pitch, left forceps, right forceps.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointConfig(pub [f64; 5]);

impl JointConfig {
    pub const ZERO: JointConfig = JointConfig([0.0; 5]);

    pub fn new(q1: f64, q2: f64, q3: f64, q4: f64, q5: f64) -> Self {
        Self([q1, q2, q3, q4, q5])
    }

    /// Forceps yaw `(q4 + q5) / 2`.
    pub fn yaw(&self) -> f64 {
        0.5 * (self.0[3] + self.0[4])
    }

    /// Grip opening `q5 − q4`.
    pub fn grip(&self) -> f64 {
        self.0[4] - self.0[3]
    }

    pub fn reduced(&self) -> ReducedJointConfig {
        ReducedJointConfig([self.0[0], self.0[1], self.0[2], self.yaw()])
    }

    /// Splits the forceps yaw symmetrically around the given grip opening.
    pub fn from_reduced(r: &ReducedJointConfig, grip_deg: f64) -> Self {
        let [q1, q2, q3, yaw] = r.0;
        Self([q1, q2, q3, yaw - grip_deg / 2.0, yaw + grip_deg / 2.0])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn within_limits(&self, spec: &ManipulatorSpec) -> bool {
        self.0
            .iter()
            .zip(spec.joint_limits.iter())
            .all(|(q, [lo, hi])| *q >= *lo && *q <= *hi)
    }

    /// Within limits with a non-negative grip opening.
    pub fn is_admissible(&self, spec: &ManipulatorSpec) -> bool {
        self.is_finite() && self.within_limits(spec) && self.grip() >= 0.0
    }

    pub fn clamped(&self, spec: &ManipulatorSpec) -> JointConfig {
        let mut out = *self;
        for (q, [lo, hi]) in out.0.iter_mut().zip(spec.joint_limits.iter()) {
            *q = q.clamp(*lo, *hi);
        }
        out
    }

    pub fn sub(&self, other: &JointConfig) -> JointConfig {
        JointConfig(std::array::from_fn(|i| self.0[i] - other.0[i]))
    }

    pub fn add(&self, other: &JointConfig) -> JointConfig {
        JointConfig(std::array::from_fn(|i| self.0[i] + other.0[i]))
    }

    pub fn scale(&self, k: f64) -> JointConfig {
        JointConfig(self.0.map(|v| v * k))
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Index<usize> for JointConfig {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for JointConfig {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<[f64; 5]> for JointConfig {
    fn from(v: [f64; 5]) -> Self {
        Self(v)
    }
}

/// `(q1, q2, q3, q_yaw)` in degrees; the unknowns of inverse kinematics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReducedJointConfig(pub [f64; 4]);

impl ReducedJointConfig {
    pub const ZERO: ReducedJointConfig = ReducedJointConfig([0.0; 4]);

    pub fn max_abs_diff(&self, other: &ReducedJointConfig) -> f64 {
        self.0.iter().zip(other.0.iter()).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Geometry of the two-segment manipulator and its forceps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManipulatorSpec {
    /// hinge modules in segment 1
    pub n1: usize,
    /// hinge modules in segment 2
    pub n2: usize,
    pub hinge: FlexureHingeParams,
    /// forceps rotation center to tip (mm)
    pub forceps_length: f64,
    /// per-joint `[min, max]` in degrees
    pub joint_limits: [[f64; 2]; 5],
}

impl Default for ManipulatorSpec {
    fn default() -> Self {
        Self::with_modules(8, 3)
    }
}

impl ManipulatorSpec {
    /// Default geometry with the bend limits implied by the module counts.
    pub fn with_modules(n1: usize, n2: usize) -> Self {
        let seg1 = HINGE_BEND_DEG * n1 as f64;
        let seg2 = HINGE_BEND_DEG * n2 as f64;
        Self {
            n1,
            n2,
            hinge: FlexureHingeParams::default(),
            forceps_length: 10.0,
            joint_limits: [[-seg1, seg1], [-seg1, seg1], [-seg2, seg2], [-90.0, 90.0], [-90.0, 90.0]],
        }
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let bad = |msg: String| Err(KinematicsError::InvalidSpec(msg));
        if self.n1 < 1 || self.n2 < 1 {
            return bad(format!("module counts must be ≥ 1 (n1={}, n2={})", self.n1, self.n2));
        }
        if !self.hinge.is_valid() {
            return bad("hinge dimensions must be positive".into());
        }
        if !(self.forceps_length.is_finite() && self.forceps_length >= 0.0) {
            return bad("forceps length must be non-negative".into());
        }
        for (name, [lo, hi]) in JOINT_NAMES.iter().zip(self.joint_limits.iter()) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("joint {name} limits must satisfy min < max"));
            }
        }
        let seg1 = HINGE_BEND_DEG * self.n1 as f64 + 1e-9;
        for (name, [lo, hi]) in JOINT_NAMES.iter().zip(self.joint_limits).take(2) {
            if lo < -seg1 || hi > seg1 {
                return bad(format!(
                    "{} limits [{lo}, {hi}] exceed ±{:.1}° for {} modules",
                    name,
                    seg1,
                    self.n1
                ));
            }
        }
        Ok(())
    }

    /// Straight length from base to forceps tip.
    pub fn straight_length(&self) -> f64 {
        let unit = self.hinge.l + self.hinge.h;
        2.0 * unit * self.n1 as f64 + unit * self.n2 as f64 + self.forceps_length
    }

    /// Centre and half-width of each joint range.
    pub fn joint_scale(&self) -> ([f64; 5], [f64; 5]) {
        let mid = std::array::from_fn(|j| 0.5 * (self.joint_limits[j][0] + self.joint_limits[j][1]));
        let half = std::array::from_fn(|j| 0.5 * (self.joint_limits[j][1] - self.joint_limits[j][0]));
        (mid, half)
    }
}
