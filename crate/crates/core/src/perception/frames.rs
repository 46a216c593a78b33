use nalgebra::{Matrix3, Vector3};

use super::rig::{MarkerRig, PsiConvention};
use super::PerceptionError;
use crate::kinematics::{end_effector_from_jaws, project_to_rotation, rot_x, RigidTransform};

const DEGENERATE_TOL: f64 = 1e-6;

/// A reconstructed frame plus how far the raw marker axes were from
/// orthonormal before projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameFit {
    pub frame: RigidTransform,
    /// Frobenius norm of `AᵀA − I` for the raw axis matrix `A`
    pub deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Jaw {
    Left,
    Right,
}

fn unit(v: Vector3<f64>, what: &str) -> Result<Vector3<f64>, PerceptionError> {
    v.try_normalize(DEGENERATE_TOL)
        .ok_or_else(|| PerceptionError::DegenerateMarkers(format!("{what} markers coincide")))
}

fn frame_from_axes(x: Vector3<f64>, y: Vector3<f64>, z: Vector3<f64>) -> (Matrix3<f64>, f64) {
    let raw = Matrix3::from_columns(&[x, y, z]);
    let deviation = (raw.transpose() * raw - Matrix3::identity()).norm();
    (project_to_rotation(&raw), deviation)
}

/// Base frame from the two red markers and the blue one: `ŷ` along r0→r1,
/// `ẑ` along r1→b0, `x̂ = ŷ × ẑ`, origin at the red midpoint plus `L_base`.
pub fn base_frame_fit(
    p_r0: &Vector3<f64>,
    p_r1: &Vector3<f64>,
    p_b0: &Vector3<f64>,
    rig: &MarkerRig,
) -> Result<FrameFit, PerceptionError> {
    let y = unit(p_r1 - p_r0, "base r0/r1")?;
    let z = unit(p_b0 - p_r1, "base r1/b0")?;
    let x = y.cross(&z);
    if x.norm() < DEGENERATE_TOL {
        return Err(PerceptionError::DegenerateMarkers("base markers are collinear".into()));
    }
    let (r, deviation) = frame_from_axes(x, y, z);
    let t = 0.5 * (p_r0 + p_r1) + r * rig.l_base;
    Ok(FrameFit { frame: RigidTransform::new(r, t), deviation })
}

pub fn base_frame(
    p_r0: &Vector3<f64>,
    p_r1: &Vector3<f64>,
    p_b0: &Vector3<f64>,
    rig: &MarkerRig,
) -> Result<RigidTransform, PerceptionError> {
    base_frame_fit(p_r0, p_r1, p_b0, rig).map(|f| f.frame)
}

/// Jaw frame from its own back/front markers and the partner jaw's back
/// marker. `ẑ` runs back→front, `x̂` is the normal of the three-marker plane
/// (the shared hinge axis), `ŷ = ẑ × x̂`. The offset angle `ψ` is then undone
/// and the origin moved from the back marker to the tip.
pub fn forceps_frame_fit(
    back: &Vector3<f64>,
    front: &Vector3<f64>,
    partner_back: &Vector3<f64>,
    rig: &MarkerRig,
    which: Jaw,
) -> Result<FrameFit, PerceptionError> {
    let z = unit(front - back, "jaw back/front")?;
    let along = (back - front) / (back - front).norm();
    let across = unit(back - partner_back, "jaw/partner")?;
    let normal = match which {
        Jaw::Left => along.cross(&across),
        Jaw::Right => -along.cross(&across),
    };
    let x = normal
        .try_normalize(DEGENERATE_TOL)
        .ok_or_else(|| PerceptionError::DegenerateMarkers("jaw markers are collinear".into()))?;
    let y = z.cross(&x);
    let (r_meas, deviation) = frame_from_axes(x, y, z);
    let r = match rig.psi_convention {
        PsiConvention::Body => r_meas * rot_x(rig.psi),
        PsiConvention::Camera => rot_x(rig.psi) * r_meas,
    };
    let l = match which {
        Jaw::Left => rig.l_fcps1,
        Jaw::Right => rig.l_fcps2,
    };
    Ok(FrameFit { frame: RigidTransform::new(r, back + r * l), deviation })
}

pub fn forceps_frame(
    back: &Vector3<f64>,
    front: &Vector3<f64>,
    partner_back: &Vector3<f64>,
    rig: &MarkerRig,
    which: Jaw,
) -> Result<RigidTransform, PerceptionError> {
    forceps_frame_fit(back, front, partner_back, rig, which).map(|f| f.frame)
}

/// End-effector pose in the robot base frame and the signed grip opening
/// (deg), from camera-frame jaw and base frames. The sign follows the
/// rotation from the left to the right jaw about the left hinge axis.
pub fn end_effector_pose(
    left: &RigidTransform,
    right: &RigidTransform,
    base: &RigidTransform,
    rig: &MarkerRig,
) -> (RigidTransform, f64) {
    let z1 = left.rotation.column(2).into_owned();
    let z2 = right.rotation.column(2).into_owned();
    let x1 = left.rotation.column(0).into_owned();
    let theta = x1.dot(&z1.cross(&z2)).atan2(z1.dot(&z2));
    let ee_cam = end_effector_from_jaws(left, right, theta, rig.d_fcps);
    (base.inverse() * ee_cam, theta.to_degrees())
}
