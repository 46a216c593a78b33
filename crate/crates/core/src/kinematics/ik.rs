//! Newton–Raphson inverse kinematics with a finite-difference Jacobian and a
//! Levenberg–Marquardt safeguard for near-singular configurations.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::chain::forward_kinematics;
use super::joints::{JointConfig, ManipulatorSpec, ReducedJointConfig};
use super::transform::{rotation_log, RigidTransform};
use super::KinematicsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkOptions {
    /// stop once the weighted residual norm drops below this
    pub tolerance: f64,
    pub max_iter: usize,
    /// floor of the damping added to `JᵀJ`
    pub damping: f64,
    /// mm per rad applied to the orientation part of the residual
    pub rot_weight: f64,
    /// central-difference step (rad)
    pub fd_step: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self { tolerance: 1e-3, max_iter: 100, damping: 1e-6, rot_weight: 10.0, fd_step: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub q: ReducedJointConfig,
    pub iterations: usize,
    pub residual: f64,
}

/// 6-vector `[p(q) − p*; w·log(R*ᵀ R(q))]`.
pub fn pose_residual(current: &RigidTransform, target: &RigidTransform, rot_weight: f64) -> [f64; 6] {
    let dp = current.translation - target.translation;
    let dr = rotation_log(&(target.rotation.transpose() * current.rotation)) * rot_weight;
    [dp.x, dp.y, dp.z, dr.x, dr.y, dr.z]
}

/// Solves for `(q1, q2, q3, q_yaw)` reaching `target` with the given grip
/// opening, starting from `q_init`.
pub fn inverse_kinematics(
    target: &RigidTransform,
    q_init: &ReducedJointConfig,
    grip_deg: f64,
    spec: &ManipulatorSpec,
    opts: &IkOptions,
) -> Result<IkSolution, KinematicsError> {
    let residual = |x: &[f64]| {
        let r = ReducedJointConfig(std::array::from_fn(|i| x[i].to_degrees()));
        let pose = forward_kinematics(&JointConfig::from_reduced(&r, grip_deg), spec);
        DVector::from_row_slice(&pose_residual(&pose, target, opts.rot_weight))
    };
    let x0: Vec<f64> = q_init.0.iter().map(|v| v.to_radians()).collect();
    let (x, iterations, res) = levenberg_marquardt(residual, &x0, opts)?;
    Ok(IkSolution {
        q: ReducedJointConfig(std::array::from_fn(|i| x[i].to_degrees())),
        iterations,
        residual: res,
    })
}

/// Least-squares pose fit that returns the best configuration found even when
/// the target is not exactly reachable. Fails only if the final residual
/// exceeds `accept`.
pub fn inverse_kinematics_least_squares(
    target: &RigidTransform,
    q_init: &ReducedJointConfig,
    grip_deg: f64,
    spec: &ManipulatorSpec,
    opts: &IkOptions,
    accept: f64,
) -> Result<IkSolution, KinematicsError> {
    let residual = |x: &[f64]| {
        let r = ReducedJointConfig(std::array::from_fn(|i| x[i].to_degrees()));
        let pose = forward_kinematics(&JointConfig::from_reduced(&r, grip_deg), spec);
        DVector::from_row_slice(&pose_residual(&pose, target, opts.rot_weight))
    };
    let x0: Vec<f64> = q_init.0.iter().map(|v| v.to_radians()).collect();
    let (x, iterations, res, _) = minimize(residual, &x0, opts);
    if !(res <= accept) {
        return Err(KinematicsError::NoConvergence { iterations, residual: res });
    }
    Ok(IkSolution {
        q: ReducedJointConfig(std::array::from_fn(|i| x[i].to_degrees())),
        iterations,
        residual: res,
    })
}

/// Position-only solve over `(q1, q2, q3)` with the forceps yaw and grip held
/// fixed. Used to turn task-space paths into joint targets.
pub fn position_ik(
    target: &Vector3<f64>,
    seed: [f64; 3],
    yaw_deg: f64,
    grip_deg: f64,
    spec: &ManipulatorSpec,
    opts: &IkOptions,
) -> Result<[f64; 3], KinematicsError> {
    let residual = |x: &[f64]| {
        let r = ReducedJointConfig([x[0].to_degrees(), x[1].to_degrees(), x[2].to_degrees(), yaw_deg]);
        let p = forward_kinematics(&JointConfig::from_reduced(&r, grip_deg), spec).translation;
        DVector::from_column_slice((p - target).as_slice())
    };
    let x0: Vec<f64> = seed.iter().map(|v| v.to_radians()).collect();
    let (x, _, _) = levenberg_marquardt(residual, &x0, opts)?;
    Ok([x[0].to_degrees(), x[1].to_degrees(), x[2].to_degrees()])
}

/// Damped least-squares position fit over `(q1, q2, q3)`: minimises
/// `‖p(q) − p*‖² + λ²‖q − anchor‖²` (mm, deg) with yaw and grip fixed,
/// starting from `seed`. Returns the joints and the remaining position error
/// (mm). Directions the tip can barely move in cost joint motion instead of
/// being chased.
#[allow(clippy::too_many_arguments)]
pub fn position_ik_damped(
    target: &Vector3<f64>,
    seed: [f64; 3],
    anchor: [f64; 3],
    yaw_deg: f64,
    grip_deg: f64,
    lambda: f64,
    spec: &ManipulatorSpec,
    opts: &IkOptions,
) -> ([f64; 3], f64) {
    let position = |x: &[f64]| {
        let r = ReducedJointConfig([x[0].to_degrees(), x[1].to_degrees(), x[2].to_degrees(), yaw_deg]);
        forward_kinematics(&JointConfig::from_reduced(&r, grip_deg), spec).translation
    };
    let x0: Vec<f64> = seed.iter().map(|v| v.to_radians()).collect();
    let residual = |x: &[f64]| {
        let d = position(x) - target;
        let mut r = DVector::zeros(6);
        r.rows_mut(0, 3).copy_from(&d);
        for k in 0..3 {
            r[3 + k] = lambda * (x[k].to_degrees() - anchor[k]);
        }
        r
    };
    // the damped objective rarely reaches `tolerance`; stop on stalls instead
    let (x, _, _, _) = minimize(residual, &x0, opts);
    let err = (position(&x) - target).norm();
    ([x[0].to_degrees(), x[1].to_degrees(), x[2].to_degrees()], err)
}

fn jacobian<F>(residual: &F, x: &[f64], m: usize, step: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> DVector<f64>,
{
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    for j in 0..n {
        xp[j] = x[j] + step;
        let fp = residual(&xp);
        xp[j] = x[j] - step;
        let fm = residual(&xp);
        xp[j] = x[j];
        jac.set_column(j, &((fp - fm) / (2.0 * step)));
    }
    jac
}

fn levenberg_marquardt<F>(residual: F, x0: &[f64], opts: &IkOptions) -> Result<(Vec<f64>, usize, f64), KinematicsError>
where
    F: Fn(&[f64]) -> DVector<f64>,
{
    let (x, iterations, norm, converged) = minimize(residual, x0, opts);
    if converged {
        Ok((x, iterations, norm))
    } else {
        Err(KinematicsError::NoConvergence { iterations, residual: norm })
    }
}

/// Returns `(x, iterations, residual norm, converged)`.
fn minimize<F>(residual: F, x0: &[f64], opts: &IkOptions) -> (Vec<f64>, usize, f64, bool)
where
    F: Fn(&[f64]) -> DVector<f64>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = residual(&x);
    let mut norm = r.norm();
    let mut lambda = opts.damping;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if norm < opts.tolerance {
            // one more Newton step is nearly free and sharpens the answer well
            // below the stopping tolerance
            if let Some((x2, r2)) = try_step(&residual, &x, &r, opts.damping, opts) {
                if r2.norm() < norm {
                    norm = r2.norm();
                    x = x2;
                }
            }
            return (x, iterations, norm, true);
        }
        if !norm.is_finite() {
            break;
        }
        iterations += 1;
        let jac = jacobian(&residual, &x, r.len(), opts.fd_step);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut accepted = false;
        for _ in 0..12 {
            let a = &jtj + DMatrix::identity(n, n) * lambda;
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&g);
            let x_new: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, si)| xi - si).collect();
            let r_new = residual(&x_new);
            let n_new = r_new.norm();
            if n_new < norm {
                x = x_new;
                r = r_new;
                norm = n_new;
                lambda = (lambda / 10.0).max(opts.damping);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    (x, iterations, norm, norm < opts.tolerance)
}

fn try_step<F>(residual: &F, x: &[f64], r: &DVector<f64>, lambda: f64, opts: &IkOptions) -> Option<(Vec<f64>, DVector<f64>)>
where
    F: Fn(&[f64]) -> DVector<f64>,
{
    let n = x.len();
    let jac = jacobian(residual, x, r.len(), opts.fd_step);
    let a = jac.transpose() * &jac + DMatrix::identity(n, n) * lambda;
    let step = a.cholesky()?.solve(&(jac.transpose() * r));
    let x_new: Vec<f64> = x.iter().zip(step.iter()).map(|(xi, si)| xi - si).collect();
    let r_new = residual(&x_new);
    Some((x_new, r_new))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn straight_pose_is_a_fixed_point() {
        let spec = ManipulatorSpec::default();
        let target = forward_kinematics(&JointConfig::ZERO, &spec);
        let sol = inverse_kinematics(&target, &ReducedJointConfig::ZERO, 0.0, &spec, &IkOptions::default()).unwrap();
        assert!(sol.q.max_abs_diff(&ReducedJointConfig::ZERO) < 1e-6);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn recovers_perturbed_configurations() {
        let spec = ManipulatorSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q = JointConfig(std::array::from_fn(|j| {
                let [lo, hi] = spec.joint_limits[j];
                rng.random_range(lo..hi)
            }));
            let grip = q.grip();
            let target = forward_kinematics(&q, &spec);
            let truth = q.reduced();
            let init = ReducedJointConfig(truth.0.map(|v| v + rng.random_range(-2.0..2.0)));
            let sol = inverse_kinematics(&target, &init, grip, &spec, &IkOptions::default()).unwrap();
            assert!(sol.q.max_abs_diff(&truth) < 0.01, "{:?} vs {:?}", sol.q, truth);
        }
    }

    #[test]
    fn far_target_does_not_converge() {
        let spec = ManipulatorSpec::default();
        let target = RigidTransform::trans(0.0, 0.0, 10.0 * spec.straight_length());
        let err = inverse_kinematics(&target, &ReducedJointConfig::ZERO, 0.0, &spec, &IkOptions::default());
        assert!(matches!(err, Err(KinematicsError::NoConvergence { .. })));
    }

    #[test]
    fn position_solve_hits_target() {
        let spec = ManipulatorSpec::default();
        let q = JointConfig::new(12.0, -8.0, 6.0, 5.0, 25.0);
        let p = forward_kinematics(&q, &spec).translation;
        let sol = position_ik(&p, [10.0, -5.0, 4.0], q.yaw(), q.grip(), &spec, &IkOptions::default()).unwrap();
        let back = forward_kinematics(&JointConfig::new(sol[0], sol[1], sol[2], q[3], q[4]), &spec).translation;
        assert!((back - p).norm() < 1e-3);
    }
}
