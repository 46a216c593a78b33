use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;

use super::hinge::{module_transform_seg1, module_transform_seg2};
use super::joints::{JointConfig, ManipulatorSpec};
use super::transform::{rot_x, RigidTransform};

/// Pose of the forceps rotation center. The returned frame has z along the
/// tool axis and x along the forceps jaw axis; at `q = 0` it is the base frame
/// shifted along z.
pub fn wrist_transform(q: &JointConfig, spec: &ManipulatorSpec) -> RigidTransform {
    let n1 = spec.n1 as f64;
    let n2 = spec.n2 as f64;
    let pitch1 = q[0].to_radians() / n1;
    let yaw1 = q[1].to_radians() / n1;
    let pitch2 = q[2].to_radians() / n2;

    // module frames run along local x; the base frame runs along z
    let mut t = RigidTransform::rot_y(-FRAC_PI_2);
    let seg1 = module_transform_seg1(pitch1, yaw1, &spec.hinge);
    for _ in 0..spec.n1 {
        t = t * seg1;
    }
    // segment-2 hinges bend in the segment-1 pitch plane
    t = t * RigidTransform::rot_x(FRAC_PI_2);
    let seg2 = module_transform_seg2(pitch2, &spec.hinge);
    for _ in 0..spec.n2 {
        t = t * seg2;
    }
    t * RigidTransform::rot_x(-FRAC_PI_2) * RigidTransform::rot_y(FRAC_PI_2)
}

/// Left and right jaw frames. Each jaw rotates about the wrist x axis by its
/// own angle; the frame origin sits at the jaw tip.
pub fn forceps_frames(q: &JointConfig, spec: &ManipulatorSpec) -> (RigidTransform, RigidTransform) {
    let wrist = wrist_transform(q, spec);
    let jaw = |angle_deg: f64| {
        let r = wrist.rotation * rot_x(angle_deg.to_radians());
        let tip = wrist.translation + r * Vector3::new(0.0, 0.0, spec.forceps_length);
        RigidTransform::new(r, tip)
    };
    (jaw(q[3]), jaw(q[4]))
}

/// End-effector pose from the jaw frames: orientation halfway between the
/// jaws, position at the jaw-tip midpoint pushed along the left jaw by
/// `d·(1 − cos(θ/2))`.
pub fn end_effector_from_jaws(
    left: &RigidTransform,
    right: &RigidTransform,
    grip_rad: f64,
    forceps_length: f64,
) -> RigidTransform {
    let half = 0.5 * grip_rad;
    let rotation = left.rotation * rot_x(half);
    let z_left = left.rotation.column(2).into_owned();
    let translation = 0.5 * (left.translation + right.translation)
        + forceps_length * (1.0 - half.cos()) * z_left;
    RigidTransform::new(rotation, translation)
}

/// Base-to-end-effector transform.
pub fn forward_kinematics(q: &JointConfig, spec: &ManipulatorSpec) -> RigidTransform {
    let (left, right) = forceps_frames(q, spec);
    end_effector_from_jaws(&left, &right, q.grip().to_radians(), spec.forceps_length)
}
