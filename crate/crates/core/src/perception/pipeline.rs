use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cloud::{synth_cloud, CloudNoise, LabeledPointCloud};
use super::frames::{base_frame, end_effector_pose, forceps_frame, Jaw};
use super::ransac::{ransac_sphere, RansacOptions};
use super::rig::{MarkerMount, MarkerRig, MARKER_IDS};
use super::PerceptionError;
use crate::kinematics::{
    forceps_frames, inverse_kinematics_least_squares, IkOptions, JointConfig, ManipulatorSpec, ReducedJointConfig,
    RigidTransform,
};

/// smallest cosine between the two jaw hinge axes
const HINGE_AGREEMENT: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RecoveryOptions {
    pub ik: IkOptions,
    /// largest weighted pose residual still accepted as a fit
    pub accept_residual: f64,
    /// degrees a recovered joint may sit outside its limits before the frame is rejected
    pub limit_slack_deg: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self { ik: IkOptions::default(), accept_residual: 5.0, limit_slack_deg: 45.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceptionConfig {
    pub noise: CloudNoise,
    pub ransac: RansacOptions,
    pub recovery: RecoveryOptions,
}

/// Ground-truth marker centres in the camera frame for configuration `q`.
pub fn marker_centers(q: &JointConfig, spec: &ManipulatorSpec, rig: &MarkerRig) -> BTreeMap<String, Vector3<f64>> {
    let cam = rig.base_in_camera;
    let (left, right) = forceps_frames(q, spec);
    rig.markers
        .iter()
        .map(|m| {
            let mount = match m.mount {
                MarkerMount::Base => cam,
                MarkerMount::LeftJaw => cam * left,
                MarkerMount::RightJaw => cam * right,
            };
            (m.id.clone(), mount.transform_point(&m.offset))
        })
        .collect()
}

/// Labelled point cloud of every marker as seen from the camera origin.
pub fn synth_scene<R: Rng + ?Sized>(
    q: &JointConfig,
    spec: &ManipulatorSpec,
    rig: &MarkerRig,
    noise: &CloudNoise,
    rng: &mut R,
) -> LabeledPointCloud {
    let centers = marker_centers(q, spec, rig);
    let mut scene = LabeledPointCloud::default();
    for m in &rig.markers {
        let c = centers[&m.id];
        scene.extend(synth_cloud(
            &c,
            &Vector3::zeros(),
            m.radius,
            &m.id,
            noise.n_points,
            noise.sigma,
            noise.outlier_frac,
            rng,
        ));
    }
    if noise.misclassification > 0.0 {
        for p in &mut scene.points {
            if rng.random::<f64>() < noise.misclassification {
                let other = MARKER_IDS[rng.random_range(0..MARKER_IDS.len())];
                p.label = other.to_string();
            }
        }
    }
    scene
}

/// RANSAC centre of every rig marker found in `cloud`.
pub fn fit_markers<R: Rng + ?Sized>(
    cloud: &LabeledPointCloud,
    rig: &MarkerRig,
    opts: &RansacOptions,
    rng: &mut R,
) -> Result<BTreeMap<String, Vector3<f64>>, PerceptionError> {
    let mut out = BTreeMap::new();
    for m in &rig.markers {
        let pts = cloud.with_label(&m.id);
        if pts.is_empty() {
            return Err(PerceptionError::MissingMarker(m.id.clone()));
        }
        let fit = ransac_sphere(&pts, m.radius, opts, &m.id, rng)?;
        out.insert(m.id.clone(), fit.center);
    }
    Ok(out)
}

/// Joint configuration from a base-frame end-effector pose and grip opening;
/// the jaw angles are split symmetrically around the recovered yaw.
/// Solutions further than the slack outside the joint limits are rejected.
pub fn recover_joint_config(
    ee_in_base: &RigidTransform,
    grip_deg: f64,
    q_prev: &ReducedJointConfig,
    spec: &ManipulatorSpec,
    opts: &RecoveryOptions,
) -> Result<JointConfig, PerceptionError> {
    let sol = inverse_kinematics_least_squares(ee_in_base, q_prev, grip_deg, spec, &opts.ik, opts.accept_residual)?;
    let q = JointConfig::from_reduced(&sol.q, grip_deg);
    let slack = opts.limit_slack_deg;
    for (j, [lo, hi]) in spec.joint_limits.iter().enumerate() {
        if !(lo - slack..=hi + slack).contains(&q[j]) {
            return Err(PerceptionError::Implausible(format!("joint {} at {:.1}° outside [{lo}, {hi}]", j + 1, q[j])));
        }
    }
    Ok(q)
}

/// Both jaws turn about one hinge, so their x axes must agree. At wide
/// openings one jaw's marker triangle folds and its x axis flips.
fn check_shared_hinge(left: &RigidTransform, right: &RigidTransform) -> Result<(), PerceptionError> {
    let agreement = left.rotation.column(0).dot(&right.rotation.column(0));
    if agreement < HINGE_AGREEMENT {
        return Err(PerceptionError::DegenerateMarkers(format!("jaw hinge axes disagree (cos {agreement:.3})")));
    }
    Ok(())
}

/// Full sensing loop for one physical configuration: synthesize the clouds,
/// fit every marker, rebuild the frames and solve for the joints.
pub fn perceive_joint_config<R: Rng + ?Sized>(
    q_true: &JointConfig,
    q_prev: &ReducedJointConfig,
    spec: &ManipulatorSpec,
    rig: &MarkerRig,
    cfg: &PerceptionConfig,
    rng: &mut R,
) -> Result<JointConfig, PerceptionError> {
    let scene = synth_scene(q_true, spec, rig, &cfg.noise, rng);
    let c = fit_markers(&scene, rig, &cfg.ransac, rng)?;
    let base = base_frame(&c["r0"], &c["r1"], &c["b0"], rig)?;
    let left = forceps_frame(&c["b1"], &c["r2"], &c["y0"], rig, Jaw::Left)?;
    let right = forceps_frame(&c["y0"], &c["g0"], &c["b1"], rig, Jaw::Right)?;
    check_shared_hinge(&left, &right)?;
    let (ee, grip) = end_effector_pose(&left, &right, &base, rig);
    recover_joint_config(&ee, grip, q_prev, spec, &cfg.recovery)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{forward_kinematics, rotation_angle, KinematicsError};
    use crate::rng::stream;

    fn sample_q(rng: &mut impl Rng, spec: &ManipulatorSpec) -> JointConfig {
        let mut q = JointConfig(std::array::from_fn(|j| {
            let [lo, hi] = spec.joint_limits[j];
            rng.random_range(lo * 0.8..hi * 0.8)
        }));
        if q[3] > q[4] {
            q.0.swap(3, 4);
        }
        q
    }

    #[test]
    fn exact_centres_reproduce_forward_kinematics() {
        let spec = ManipulatorSpec::default();
        let rig = MarkerRig::default();
        let mut rng = stream(11, "q");
        for _ in 0..20 {
            let q = sample_q(&mut rng, &spec);
            let c = marker_centers(&q, &spec, &rig);
            let base = base_frame(&c["r0"], &c["r1"], &c["b0"], &rig).unwrap();
            let left = forceps_frame(&c["b1"], &c["r2"], &c["y0"], &rig, Jaw::Left).unwrap();
            let right = forceps_frame(&c["y0"], &c["g0"], &c["b1"], &rig, Jaw::Right).unwrap();
            let (ee, grip) = end_effector_pose(&left, &right, &base, &rig);
            let fk = forward_kinematics(&q, &spec);
            assert!((ee.translation - fk.translation).norm() < 1e-6);
            assert!(rotation_angle(&(fk.rotation.transpose() * ee.rotation)) < 1e-6);
            assert!((grip - q.grip()).abs() < 1e-6);
        }
    }

    #[test]
    fn noiseless_pipeline_recovers_joints() {
        let spec = ManipulatorSpec::default();
        let rig = MarkerRig::default();
        let cfg = PerceptionConfig::default();
        let mut rng = stream(12, "q");
        for _ in 0..10 {
            let q = sample_q(&mut rng, &spec);
            let est = perceive_joint_config(&q, &ReducedJointConfig::ZERO, &spec, &rig, &cfg, &mut rng).unwrap();
            for j in 0..5 {
                assert!((est[j] - q[j]).abs() < 0.05, "joint {j}: {} vs {}", est[j], q[j]);
            }
        }
    }

    #[test]
    fn zero_grip_gives_equal_jaws() {
        let spec = ManipulatorSpec::default();
        let q = JointConfig::new(10.0, -5.0, 4.0, 20.0, 20.0);
        let ee = forward_kinematics(&q, &spec);
        let r = recover_joint_config(&ee, 0.0, &ReducedJointConfig::ZERO, &spec, &RecoveryOptions::default()).unwrap();
        assert_eq!(r[3], r[4]);
        assert!((r[3] - 20.0).abs() < 0.01);
    }

    #[test]
    fn corrupted_pose_surfaces_no_convergence() {
        let spec = ManipulatorSpec::default();
        let far = RigidTransform::trans(500.0, 0.0, 0.0);
        let r = recover_joint_config(&far, 0.0, &ReducedJointConfig::ZERO, &spec, &RecoveryOptions::default());
        assert!(matches!(r, Err(PerceptionError::Kinematics(KinematicsError::NoConvergence { .. }))));
    }

    #[test]
    fn crossed_jaws_keep_the_grip_sign() {
        let spec = ManipulatorSpec::default();
        let rig = MarkerRig::default();
        let q = JointConfig::new(9.8, -11.7, -0.7, 21.2, 20.7);
        let est = perceive_joint_config(&q, &q.reduced(), &spec, &rig, &PerceptionConfig::default(), &mut stream(13, "q"))
            .unwrap();
        assert!((0..5).all(|j| (est[j] - q[j]).abs() < 0.05), "{est:?}");
    }

    #[test]
    fn folded_jaw_triangle_is_rejected() {
        let spec = ManipulatorSpec::default();
        let rig = MarkerRig::default();
        let q = JointConfig::new(-3.2, -13.7, -4.2, -79.6, 81.6);
        let r = perceive_joint_config(&q, &q.reduced(), &spec, &rig, &PerceptionConfig::default(), &mut stream(14, "q"));
        assert!(matches!(r, Err(PerceptionError::DegenerateMarkers(_))), "{r:?}");
    }

    #[test]
    fn out_of_limit_solutions_are_rejected() {
        let spec = ManipulatorSpec::default();
        let q = JointConfig::new(5.0, -10.0, 200.0, -20.0, 30.0);
        let ee = forward_kinematics(&q, &spec);
        let seed = q.reduced();
        let r = recover_joint_config(&ee, q.grip(), &seed, &spec, &RecoveryOptions::default());
        assert!(matches!(r, Err(PerceptionError::Implausible(_))), "{r:?}");
        let loose = RecoveryOptions { limit_slack_deg: 360.0, ..RecoveryOptions::default() };
        assert!(recover_joint_config(&ee, q.grip(), &seed, &spec, &loose).is_ok());
    }
}
