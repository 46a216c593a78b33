use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PerceptionError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacOptions {
    pub iters: usize,
    /// |‖p − c‖ − r| below this counts as an inlier (mm)
    pub inlier_tol: f64,
    /// minimum inlier share of the cloud
    pub quorum_frac: f64,
    /// Gauss–Newton refinement steps
    pub refine_iters: usize,
}

impl Default for RansacOptions {
    fn default() -> Self {
        Self { iters: 500, inlier_tol: 1.0, quorum_frac: 0.3, refine_iters: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereFit {
    pub center: Vector3<f64>,
    pub radius: f64,
    pub inliers: usize,
    /// RMS radial residual over inliers (mm)
    pub inlier_rms: f64,
}

/// The (up to two) centres at distance `r` from three points.
fn centers_through(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>, r: f64) -> Option<[Vector3<f64>; 2]> {
    let ab = b - a;
    let ac = c - a;
    let n = ab.cross(&ac);
    let n2 = n.norm_squared();
    if n2 < 1e-18 {
        return None;
    }
    // circumcentre of the triangle
    let cc = a + (ac.norm_squared() * n.cross(&ab) + ab.norm_squared() * ac.cross(&n)) / (2.0 * n2);
    let rho2 = (cc - a).norm_squared();
    let h2 = r * r - rho2;
    if h2 < 0.0 {
        return None;
    }
    let off = n / n2.sqrt() * h2.sqrt();
    Some([cc + off, cc - off])
}

fn count_inliers(points: &[Vector3<f64>], c: &Vector3<f64>, r: f64, tol: f64) -> usize {
    points.iter().filter(|p| ((*p - c).norm() - r).abs() < tol).count()
}

/// Least-squares centre with the radius held fixed.
fn refine(points: &[Vector3<f64>], mut c: Vector3<f64>, r: f64, iters: usize) -> Vector3<f64> {
    for _ in 0..iters {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for p in points {
            let d = c - p;
            let dist = d.norm();
            if dist < 1e-12 {
                continue;
            }
            let j = d / dist;
            jtj += j * j.transpose();
            jtr += j * (dist - r);
        }
        let Some(step) = jtj.lu().solve(&jtr) else { break };
        c -= step;
        if step.norm() < 1e-14 {
            break;
        }
    }
    c
}

/// Known-radius RANSAC: each minimal 3-point sample yields two candidate
/// centres; the best-consensus centre is refined over its inliers.
pub fn ransac_sphere<R: Rng + ?Sized>(
    points: &[Vector3<f64>],
    radius: f64,
    opts: &RansacOptions,
    label: &str,
    rng: &mut R,
) -> Result<SphereFit, PerceptionError> {
    let quorum = ((opts.quorum_frac * points.len() as f64).ceil() as usize).max(4);
    let fail = |inliers| PerceptionError::FitFailed { label: label.to_string(), inliers, quorum };
    if points.len() < 4 {
        return Err(fail(0));
    }
    let n = points.len();
    let mut best: Option<(usize, Vector3<f64>)> = None;
    for _ in 0..opts.iters {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let mut k = rng.random_range(0..n - 2);
        for taken in [i.min(j), i.max(j)] {
            if k >= taken {
                k += 1;
            }
        }
        let Some(cands) = centers_through(&points[i], &points[j], &points[k], radius) else { continue };
        for c in cands {
            let count = count_inliers(points, &c, radius, opts.inlier_tol);
            if best.is_none_or(|(b, _)| count > b) {
                best = Some((count, c));
            }
        }
    }
    let Some((count, c0)) = best else { return Err(fail(0)) };
    if count < quorum {
        return Err(fail(count));
    }
    let inliers = |c: &Vector3<f64>| -> Vec<Vector3<f64>> {
        points.iter().copied().filter(|p| ((p - c).norm() - radius).abs() < opts.inlier_tol).collect()
    };
    let mut center = refine(&inliers(&c0), c0, radius, opts.refine_iters);
    // one re-selection pass with the refined centre
    let set = inliers(&center);
    if set.len() >= quorum {
        center = refine(&set, center, radius, opts.refine_iters);
    }
    let set = inliers(&center);
    let rms = if set.is_empty() {
        0.0
    } else {
        (set.iter().map(|p| ((p - center).norm() - radius).powi(2)).sum::<f64>() / set.len() as f64).sqrt()
    };
    if set.len() < quorum {
        return Err(fail(set.len()));
    }
    Ok(SphereFit { center, radius, inliers: set.len(), inlier_rms: rms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::synth_cloud;
    use crate::rng::stream;

    #[test]
    fn three_point_centres_are_equidistant() {
        let a = Vector3::new(1.0, 0.0, 0.0);
        let b = Vector3::new(0.0, 1.0, 0.0);
        let c = Vector3::new(0.0, 0.0, 1.0);
        let [c1, c2] = centers_through(&a, &b, &c, 2.0).unwrap();
        for cand in [c1, c2] {
            for p in [a, b, c] {
                assert!(((p - cand).norm() - 2.0).abs() < 1e-12);
            }
        }
        assert!(centers_through(&a, &b, &c, 0.1).is_none());
    }

    #[test]
    fn noiseless_cloud_recovers_center_exactly() {
        let c = Vector3::new(10.0, -4.0, 120.0);
        let cloud = synth_cloud(&c, &Vector3::zeros(), 4.0, "r0", 200, 0.0, 0.0, &mut stream(3, "cloud"));
        let fit =
            ransac_sphere(&cloud.with_label("r0"), 4.0, &RansacOptions::default(), "r0", &mut stream(3, "ransac"))
                .unwrap();
        assert!((fit.center - c).norm() < 1e-9);
        assert_eq!(fit.inliers, 200);
    }

    #[test]
    fn all_outlier_cloud_fails() {
        let c = Vector3::new(0.0, 0.0, 100.0);
        let cloud = synth_cloud(&c, &Vector3::zeros(), 4.0, "r0", 200, 0.0, 1.0, &mut stream(4, "cloud"));
        let err =
            ransac_sphere(&cloud.with_label("r0"), 4.0, &RansacOptions::default(), "r0", &mut stream(4, "ransac"));
        assert!(matches!(err, Err(PerceptionError::FitFailed { .. })));
    }

    #[test]
    fn too_few_points_fail() {
        let pts = vec![Vector3::zeros(); 3];
        assert!(ransac_sphere(&pts, 1.0, &RansacOptions::default(), "x", &mut stream(0, "r")).is_err());
    }
}
