//! Flexure-hinge geometry, forward kinematics of the two-segment chain with
//! forceps, and numerical inverse kinematics.
//!
//! Angles are degrees at every public boundary except the hinge-level helpers,
//! which take radians.

mod chain;
mod hinge;
mod ik;
mod joints;
mod transform;

use thiserror::Error;

pub use chain::{end_effector_from_jaws, forceps_frames, forward_kinematics, wrist_transform};
pub use hinge::{
    dh_transform, module_transform_seg1, module_transform_seg2, seg1_module_rows, seg2_module_rows, tr_length,
    DhRow, FlexureHingeParams, SERIES_THRESHOLD,
};
pub use ik::{
    inverse_kinematics, inverse_kinematics_least_squares, pose_residual, position_ik, position_ik_damped, IkOptions, IkSolution,
};
pub use joints::{JointConfig, ManipulatorSpec, ReducedJointConfig, HINGE_BEND_DEG, JOINT_NAMES};
pub use transform::{
    axis_angle, project_to_rotation, rot_x, rot_y, rot_z, rotation_angle, rotation_log, RigidTransform,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("inverse kinematics did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid manipulator spec: {0}")]
    InvalidSpec(String),
}
