//! Synthetic fiducial-marker sensing: sphere point clouds, RANSAC centre
//! fits, marker-based frame reconstruction and joint recovery.

mod cloud;
mod frames;
mod pipeline;
mod ransac;
mod rig;

use thiserror::Error;

use crate::kinematics::KinematicsError;

pub use cloud::{read_cloud_csv, synth_cloud, write_cloud_csv, CloudNoise, LabeledPoint, LabeledPointCloud};
pub use frames::{base_frame, base_frame_fit, end_effector_pose, forceps_frame, forceps_frame_fit, FrameFit, Jaw};
pub use pipeline::{
    fit_markers, marker_centers, perceive_joint_config, recover_joint_config, synth_scene, PerceptionConfig,
    RecoveryOptions,
};
pub use ransac::{ransac_sphere, RansacOptions, SphereFit};
pub use rig::{Marker, MarkerMount, MarkerRig, PsiConvention, MARKER_IDS};

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("sphere fit failed for {label}: {inliers} inliers, quorum {quorum}")]
    FitFailed { label: String, inliers: usize, quorum: usize },
    #[error("degenerate marker geometry: {0}")]
    DegenerateMarkers(String),
    #[error("marker {0} missing from cloud")]
    MissingMarker(String),
    #[error("implausible recovery: {0}")]
    Implausible(String),
    #[error("invalid marker rig: {0}")]
    InvalidRig(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("point cloud I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("point cloud CSV: {0}")]
    Csv(#[from] csv::Error),
}
