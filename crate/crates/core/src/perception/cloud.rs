use std::path::Path;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::PerceptionError;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub p: Vector3<f64>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledPointCloud {
    pub points: Vec<LabeledPoint>,
    /// fraction of points generated as outliers
    pub outlier_fraction: f64,
}

impl LabeledPointCloud {
    pub fn with_label(&self, label: &str) -> Vec<Vector3<f64>> {
        self.points.iter().filter(|p| p.label == label).map(|p| p.p).collect()
    }

    pub fn extend(&mut self, other: LabeledPointCloud) {
        let n0 = self.points.len() as f64;
        let n1 = other.points.len() as f64;
        if n0 + n1 > 0.0 {
            self.outlier_fraction = (self.outlier_fraction * n0 + other.outlier_fraction * n1) / (n0 + n1);
        }
        self.points.extend(other.points);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CloudNoise {
    pub n_points: usize,
    /// radial noise SD (mm)
    pub sigma: f64,
    pub outlier_frac: f64,
    /// fraction of points relabelled to another marker colour
    pub misclassification: f64,
}

impl Default for CloudNoise {
    fn default() -> Self {
        Self { n_points: 200, sigma: 0.0, outlier_frac: 0.0, misclassification: 0.0 }
    }
}

/// Points on the hemisphere facing `viewpoint`, with radial Gaussian noise,
/// plus uniform outliers in the surrounding box that all miss the sphere
/// surface by more than `5σ`.
#[allow(clippy::too_many_arguments)]
pub fn synth_cloud<R: Rng + ?Sized>(
    center: &Vector3<f64>,
    viewpoint: &Vector3<f64>,
    radius: f64,
    label: &str,
    n_points: usize,
    sigma: f64,
    outlier_frac: f64,
    rng: &mut R,
) -> LabeledPointCloud {
    let n_out = (n_points as f64 * outlier_frac.clamp(0.0, 1.0)).round() as usize;
    let n_in = n_points - n_out;
    let toward = (viewpoint - center).try_normalize(1e-12).unwrap_or_else(Vector3::z);
    let radial = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("σ > 0"));
    let mut points = Vec::with_capacity(n_points);
    while points.len() < n_in {
        let v: Vector3<f64> = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
        let Some(mut u) = v.try_normalize(1e-12) else { continue };
        if u.dot(&toward) < 0.0 {
            u = -u;
        }
        let r = radius + radial.as_ref().map_or(0.0, |n| n.sample(rng));
        points.push(LabeledPoint { p: center + u * r, label: label.to_string() });
    }
    let margin = (5.0 * sigma).max(1e-3 * radius);
    let half = 3.0 * radius + 5.0 * sigma;
    while points.len() < n_points {
        let p = center + Vector3::new(
            rng.random_range(-half..half),
            rng.random_range(-half..half),
            rng.random_range(-half..half),
        );
        if ((p - center).norm() - radius).abs() > margin {
            points.push(LabeledPoint { p, label: label.to_string() });
        }
    }
    LabeledPointCloud { points, outlier_fraction: n_out as f64 / n_points.max(1) as f64 }
}

pub fn write_cloud_csv(path: &Path, cloud: &LabeledPointCloud) -> Result<(), PerceptionError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y", "z", "label"])?;
    for p in &cloud.points {
        w.write_record([p.p.x.to_string(), p.p.y.to_string(), p.p.z.to_string(), p.label.clone()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cloud_csv(path: &Path) -> Result<LabeledPointCloud, PerceptionError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64, PerceptionError> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| PerceptionError::Io(std::io::Error::other(format!("bad number in column {i}"))))
        };
        let label = rec.get(3).unwrap_or("").to_string();
        points.push(LabeledPoint { p: Vector3::new(num(0)?, num(1)?, num(2)?), label });
    }
    Ok(LabeledPointCloud { points, outlier_fraction: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn noiseless_points_lie_on_the_sphere() {
        let c = Vector3::new(1.0, 2.0, 50.0);
        let cloud = synth_cloud(&c, &Vector3::zeros(), 4.0, "r0", 100, 0.0, 0.0, &mut stream(1, "t"));
        assert_eq!(cloud.points.len(), 100);
        for p in &cloud.points {
            assert!(((p.p - c).norm() - 4.0).abs() < 1e-12);
            // visible side faces the viewpoint
            assert!((p.p - c).dot(&(-c)) >= 0.0);
        }
    }

    #[test]
    fn outliers_violate_the_sphere_equation() {
        let c = Vector3::new(0.0, 0.0, 100.0);
        let sigma = 0.5;
        let cloud = synth_cloud(&c, &Vector3::zeros(), 4.0, "b0", 200, sigma, 0.2, &mut stream(2, "t"));
        let far = cloud.points.iter().filter(|p| ((p.p - c).norm() - 4.0).abs() > 5.0 * sigma).count();
        assert!(far >= 40, "{far}");
        assert_eq!(cloud.outlier_fraction, 0.2);
    }

    #[test]
    fn same_seed_same_cloud_and_csv_round_trip() {
        let c = Vector3::new(3.0, -1.0, 80.0);
        let a = synth_cloud(&c, &Vector3::zeros(), 2.0, "y0", 60, 0.1, 0.1, &mut stream(5, "t"));
        let b = synth_cloud(&c, &Vector3::zeros(), 2.0, "y0", 60, 0.1, 0.1, &mut stream(5, "t"));
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.csv");
        write_cloud_csv(&path, &a).unwrap();
        let back = read_cloud_csv(&path).unwrap();
        assert_eq!(back.points, a.points);
    }
}
