//! Cable length variation per joint, differential-pair actuation, and
//! decoupling of distal cables routed through the proximal segments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{JointConfig, ManipulatorSpec, SERIES_THRESHOLD};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CableError {
    #[error("joint {joint} = {value:.3}° outside [{min}, {max}]")]
    JointLimit { joint: usize, value: f64, min: f64, max: f64 },
    #[error("invalid cable routing: {0}")]
    InvalidRouting(String),
    #[error("cable pair for joint {joint} is not physically invertible")]
    NotInvertible { joint: usize },
}

/// Length change of a cable at diametric offset `d` over `n` hinges of
/// notch length `H` bent by `θ` in total: `(H·n/θ − d/2)·2·sin(θ/2n)`.
///
/// Evaluated as `H·sinc(θ/2n) − d·sin(θ/2n)`; tends to `H` as `θ → 0`.
pub fn cable_delta(theta: f64, d: f64, notch: f64, n: usize) -> f64 {
    let n = n.max(1) as f64;
    let u = theta / (2.0 * n);
    let sinc = if theta.abs() < SERIES_THRESHOLD {
        let u2 = u * u;
        1.0 - u2 / 6.0 + u2 * u2 / 120.0
    } else {
        u.sin() / u
    };
    notch * sinc - d * u.sin()
}

/// Length change relative to the straight configuration.
fn relative_delta(theta: f64, d: f64, notch: f64, n: usize) -> f64 {
    cable_delta(theta, d, notch, n) - cable_delta(0.0, d, notch, n)
}

/// Which bending plane a cable's offset lies in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BendPlane {
    Pitch,
    Yaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CableSpec {
    /// 1..=10
    pub cable_id: u8,
    /// diametric offset from the neutral axis (mm)
    pub d: f64,
    /// joint index (0-based) the pair drives
    pub joint: usize,
    /// +1 / −1 within the differential pair
    pub sign: i8,
}

impl CableSpec {
    /// Bending plane of the driven joint; forceps jaws turn in the yaw plane.
    pub fn plane(&self) -> BendPlane {
        match self.joint {
            0 | 2 => BendPlane::Pitch,
            _ => BendPlane::Yaw,
        }
    }

    fn signed_offset(&self) -> f64 {
        f64::from(self.sign) * self.d
    }

    fn offset_in(&self, plane: BendPlane) -> f64 {
        if self.plane() == plane {
            self.signed_offset()
        } else {
            0.0
        }
    }
}

/// Which distal cables get corrected for proximal bending.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Decoupling {
    /// correct segment-2 and forceps cables for segment-1 bending
    pub segment1: bool,
    /// correct forceps cables for segment-2 bending
    pub segment2: bool,
}

impl Default for Decoupling {
    fn default() -> Self {
        Self { segment1: true, segment2: true }
    }
}

impl Decoupling {
    pub const OFF: Decoupling = Decoupling { segment1: false, segment2: false };
}

/// The ten driving cables. Default: every cable at `d = 4 mm` (2 mm routing
/// radius), w1–w4 on segment 1, w5–w6 on segment 2, w7–w10 on the forceps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CableRouting {
    pub cables: Vec<CableSpec>,
    pub decoupling: Decoupling,
}

impl Default for CableRouting {
    fn default() -> Self {
        Self::uniform(4.0)
    }
}

impl CableRouting {
    pub fn uniform(d: f64) -> Self {
        let joint_of = [0, 0, 1, 1, 2, 2, 3, 3, 4, 4];
        let cables = (0..10)
            .map(|i| CableSpec { cable_id: i as u8 + 1, d, joint: joint_of[i], sign: if i % 2 == 0 { 1 } else { -1 } })
            .collect();
        Self { cables, decoupling: Decoupling::default() }
    }

    pub fn validate(&self) -> Result<(), CableError> {
        if self.cables.len() != 10 {
            return Err(CableError::InvalidRouting(format!("expected 10 cables, got {}", self.cables.len())));
        }
        for j in 0..5 {
            let pair: Vec<_> = self.cables.iter().filter(|c| c.joint == j).collect();
            if pair.len() != 2 || pair[0].sign == pair[1].sign || pair.iter().any(|c| c.sign.abs() != 1) {
                return Err(CableError::InvalidRouting(format!("joint {j} needs one +1 and one −1 cable")));
            }
            if (pair[0].d - pair[1].d).abs() > 1e-12 {
                return Err(CableError::InvalidRouting(format!("joint {j} pair has unequal offsets")));
            }
        }
        for c in &self.cables {
            if !(c.d.is_finite() && c.d > 0.0) {
                return Err(CableError::InvalidRouting(format!("cable w{} offset must be > 0", c.cable_id)));
            }
        }
        Ok(())
    }

    fn pair(&self, joint: usize) -> (CableSpec, CableSpec, usize, usize) {
        let mut idx = self.cables.iter().enumerate().filter(|(_, c)| c.joint == joint);
        let (ia, a) = idx.next().expect("validated routing");
        let (ib, b) = idx.next().expect("validated routing");
        if a.sign > 0 {
            (*a, *b, ia, ib)
        } else {
            (*b, *a, ib, ia)
        }
    }
}

/// Ten cable length changes (mm), indexed like the routing table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CableCommand {
    pub delta_w: [f64; 10],
}

fn notch_and_count(joint: usize, spec: &ManipulatorSpec) -> (f64, usize) {
    let n = match joint {
        0 | 1 => spec.n1,
        2 => spec.n2,
        _ => 1,
    };
    (spec.hinge.h, n)
}

/// Length change of `cable` due to its own joint bending by `theta_deg`.
fn own_delta(cable: &CableSpec, theta_deg: f64, spec: &ManipulatorSpec) -> f64 {
    let (notch, n) = notch_and_count(cable.joint, spec);
    relative_delta(theta_deg.to_radians(), cable.signed_offset(), notch, n)
}

/// Path change a distal cable picks up while crossing bent proximal segments.
fn induced_delta(cable: &CableSpec, q: &JointConfig, spec: &ManipulatorSpec, through: Decoupling) -> f64 {
    let h = spec.hinge.h;
    let mut total = 0.0;
    if through.segment1 && cable.joint >= 2 {
        total += relative_delta(q[0].to_radians(), cable.offset_in(BendPlane::Pitch), h, spec.n1);
        total += relative_delta(q[1].to_radians(), cable.offset_in(BendPlane::Yaw), h, spec.n1);
    }
    if through.segment2 && cable.joint >= 3 {
        total += relative_delta(q[2].to_radians(), cable.offset_in(BendPlane::Pitch), h, spec.n2);
    }
    total
}

/// Maps joint angles to cable length changes, each joint driven by its
/// differential pair, with distal cables corrected per `routing.decoupling`.
pub fn joints_to_cables(
    q: &JointConfig,
    spec: &ManipulatorSpec,
    routing: &CableRouting,
) -> Result<CableCommand, CableError> {
    for (j, [lo, hi]) in spec.joint_limits.iter().enumerate() {
        if !(q[j] >= *lo && q[j] <= *hi) {
            return Err(CableError::JointLimit { joint: j, value: q[j], min: *lo, max: *hi });
        }
    }
    routing.validate()?;
    let mut delta_w = [0.0; 10];
    for (i, cable) in routing.cables.iter().enumerate() {
        delta_w[i] = own_delta(cable, q[cable.joint], spec) + induced_delta(cable, q, spec, routing.decoupling);
    }
    Ok(CableCommand { delta_w })
}

/// Joint angles an ideal, friction-free robot settles at for a cable command.
///
/// Proximal joints are resolved first; the path change that bending them
/// physically induces on distal cables is removed before inverting each
/// differential pair.
pub fn cables_to_joints(
    cmd: &CableCommand,
    spec: &ManipulatorSpec,
    routing: &CableRouting,
) -> Result<JointConfig, CableError> {
    routing.validate()?;
    let physical = Decoupling { segment1: true, segment2: true };
    let mut q = JointConfig::ZERO;
    for joint in 0..5 {
        let (a, b, ia, ib) = routing.pair(joint);
        let wa = cmd.delta_w[ia] - induced_delta(&a, &q, spec, physical);
        let wb = cmd.delta_w[ib] - induced_delta(&b, &q, spec, physical);
        // wa − wb = −2·d·sin(θ/2n) for the pair
        let (_, n) = notch_and_count(joint, spec);
        let s = -(wa - wb) / (2.0 * a.d);
        if s.abs() > 1.0 {
            return Err(CableError::NotInvertible { joint });
        }
        q[joint] = (2.0 * n as f64 * s.asin()).to_degrees();
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn limit_at_zero_is_notch_length() {
        assert_eq!(cable_delta(0.0, 4.0, 0.5, 11), 0.5);
        assert_relative_eq!(cable_delta(1e-7, 4.0, 0.5, 11), 0.5, epsilon = 1e-7);
    }

    #[test]
    fn neutral_cable_matches_formula() {
        // (0.5·11/0.5)·2·sin(0.5/22) evaluated with 50-digit arithmetic (mpmath)
        assert_relative_eq!(cable_delta(0.5, 0.0, 0.5, 11), 0.4999569570345269, epsilon = 1e-15);
    }

    #[test]
    fn offset_term_splits_off() {
        let theta = 0.3;
        let split = cable_delta(theta, 4.0, 0.5, 11) - cable_delta(theta, 0.0, 0.5, 11);
        assert_relative_eq!(split, -4.0 * (theta / 22.0).sin(), epsilon = 1e-15);
    }

    #[test]
    fn smooth_across_series_switchover() {
        for n in [1, 3, 8] {
            let lo = SERIES_THRESHOLD * (1.0 - 1e-9);
            let hi = SERIES_THRESHOLD * (1.0 + 1e-9);
            assert!((cable_delta(lo, 4.0, 0.5, n) - cable_delta(hi, 4.0, 0.5, n)).abs() < 1e-8);
            // one-sided slopes on both sides agree
            let h = 1e-8;
            let slope = |x: f64| (cable_delta(x + h, 4.0, 0.5, n) - cable_delta(x - h, 4.0, 0.5, n)) / (2.0 * h);
            assert!((slope(SERIES_THRESHOLD * 0.99) - slope(SERIES_THRESHOLD * 1.01)).abs() < 2e-7);
        }
    }

    #[test]
    fn zero_pose_needs_no_cable_motion() {
        let spec = ManipulatorSpec::default();
        let cmd = joints_to_cables(&JointConfig::ZERO, &spec, &CableRouting::default()).unwrap();
        assert!(cmd.delta_w.iter().all(|w| *w == 0.0));
    }

    #[test]
    fn proximal_bend_drives_decoupling() {
        let spec = ManipulatorSpec::default();
        let q = JointConfig::new(30.0, 0.0, 0.0, 0.0, 0.0);
        let on = joints_to_cables(&q, &spec, &CableRouting::default()).unwrap();
        assert!(on.delta_w[0] < 0.0 && on.delta_w[1] > 0.0);
        // w5/w6 ride along the segment-1 pitch offsets
        let expect5 = relative_delta(30f64.to_radians(), 4.0, 0.5, 8);
        let expect6 = relative_delta(30f64.to_radians(), -4.0, 0.5, 8);
        assert_relative_eq!(on.delta_w[4], expect5, epsilon = 1e-15);
        assert_relative_eq!(on.delta_w[5], expect6, epsilon = 1e-15);
        assert!(on.delta_w[4].abs() > 0.1);

        let routing = CableRouting { decoupling: Decoupling::OFF, ..CableRouting::default() };
        let off = joints_to_cables(&q, &spec, &routing).unwrap();
        assert_eq!(off.delta_w[4], 0.0);
        assert_eq!(off.delta_w[5], 0.0);
    }

    #[test]
    fn distal_bend_leaves_proximal_cables() {
        let spec = ManipulatorSpec::default();
        let cmd = joints_to_cables(&JointConfig::new(0.0, 0.0, 12.0, 0.0, 0.0), &spec, &CableRouting::default()).unwrap();
        assert!(cmd.delta_w[..4].iter().all(|w| *w == 0.0));
        assert!(cmd.delta_w[4] != 0.0);
    }

    #[test]
    fn pair_members_mirror_each_other() {
        let spec = ManipulatorSpec::default();
        let routing = CableRouting { decoupling: Decoupling::OFF, ..Default::default() };
        let q = JointConfig::new(20.0, -10.0, 7.0, -30.0, 45.0);
        let neg = q.scale(-1.0);
        let a = joints_to_cables(&q, &spec, &routing).unwrap();
        let b = joints_to_cables(&neg, &spec, &routing).unwrap();
        for j in 0..5 {
            assert_relative_eq!(a.delta_w[2 * j], b.delta_w[2 * j + 1], epsilon = 1e-15);
        }
    }

    #[test]
    fn out_of_range_joint_is_rejected() {
        let spec = ManipulatorSpec::default();
        let err = joints_to_cables(&JointConfig::new(80.0, 0.0, 0.0, 0.0, 0.0), &spec, &CableRouting::default());
        assert!(matches!(err, Err(CableError::JointLimit { joint: 0, .. })));
    }

    #[test]
    fn ideal_robot_inverts_decoupled_command() {
        let spec = ManipulatorSpec::default();
        let routing = CableRouting::default();
        let q = JointConfig::new(-25.0, 33.0, 9.0, -40.0, 15.0);
        let cmd = joints_to_cables(&q, &spec, &routing).unwrap();
        let back = cables_to_joints(&cmd, &spec, &routing).unwrap();
        for j in 0..5 {
            assert_relative_eq!(back[j], q[j], epsilon = 1e-9);
        }
    }
}
