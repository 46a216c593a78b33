use nalgebra::{Matrix3, Matrix4, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

/// Rotation plus translation (mm). All kinematic outputs and marker frames use this.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Self {
        Self { rotation, translation: Vector3::zeros() }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self { rotation: Matrix3::identity(), translation }
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::from_rotation(rot_x(angle))
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::from_rotation(rot_y(angle))
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_rotation(rot_z(angle))
    }

    pub fn trans(x: f64, y: f64, z: f64) -> Self {
        Self::from_translation(Vector3::new(x, y, z))
    }

    /// `self * other`: apply `other` first, expressed in `self`'s frame.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform { rotation: rt, translation: -(rt * self.translation) }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_homogeneous(m: &Matrix4<f64>) -> Self {
        Self {
            rotation: m.fixed_view::<3, 3>(0, 0).into_owned(),
            translation: m.fixed_view::<3, 1>(0, 3).into_owned(),
        }
    }

    /// Largest entry of `RᵀR − I` together with `|det R − 1|`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        gram.amax().max((self.rotation.determinant() - 1.0).abs())
    }

    pub fn is_rigid(&self, tol: f64) -> bool {
        self.orthonormality_error() <= tol
    }

    /// Geodesic angle (rad) between the two orientations.
    pub fn rotation_angle_to(&self, other: &RigidTransform) -> f64 {
        rotation_angle(&(self.rotation.transpose() * other.rotation))
    }
}

impl std::ops::Mul for RigidTransform {
    type Output = RigidTransform;
    fn mul(self, rhs: RigidTransform) -> RigidTransform {
        self.compose(&rhs)
    }
}

impl std::ops::Mul<&RigidTransform> for &RigidTransform {
    type Output = RigidTransform;
    fn mul(self, rhs: &RigidTransform) -> RigidTransform {
        self.compose(rhs)
    }
}

pub fn rot_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

pub fn axis_angle(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle).into_inner()
}

/// Rotation vector (axis × angle, rad) of a rotation matrix, valid on the whole
/// range `[0, π]`.
pub fn rotation_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let angle = cos.acos();
    let skew = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    if angle < 1e-6 {
        // sin θ ≈ θ: log ≈ vee(R − Rᵀ)/2
        return skew * 0.5;
    }
    if std::f64::consts::PI - angle < 1e-6 {
        // Near π the skew part vanishes; recover the axis from R + I.
        let b = (r + Matrix3::identity()) * 0.5;
        let col = (0..3)
            .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
            .unwrap_or(0);
        let mut axis: Vector3<f64> = b.column(col).into_owned();
        axis /= axis.norm().max(f64::MIN_POSITIVE);
        // keep the sign consistent with the (tiny) skew part when available
        if axis.dot(&skew) < 0.0 {
            axis = -axis;
        }
        return axis * angle;
    }
    skew * (angle / (2.0 * angle.sin()))
}

/// Geodesic rotation angle in `[0, π]`.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    // atan2 form keeps precision near 0 and π
    let skew = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let sin2 = skew.norm();
    let cos2 = r.trace() - 1.0;
    sin2.atan2(cos2)
}

/// Closest rotation in the Frobenius sense (polar factor). Reflections are
/// folded back to `det = +1` by flipping the weakest singular direction.
pub fn project_to_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Matrix3::identity();
    };
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        // singular values are sorted descending; flip the last column
        let mut c = u2.column_mut(2);
        c *= -1.0;
        r = u2 * v_t;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn log_round_trips_through_axis_angle() {
        for &angle in &[0.0, 1e-9, 0.3, 1.5, 3.0, PI - 1e-9] {
            let axis = Vector3::new(0.2, -0.5, 0.7).normalize();
            let r = axis_angle(&axis, angle);
            let w = rotation_log(&r);
            assert_relative_eq!(w.norm(), angle, epsilon = 1e-7);
            if angle > 1e-3 {
                assert_relative_eq!(w.normalize(), axis, epsilon = 1e-6);
            }
            assert_relative_eq!(rotation_angle(&r), angle, epsilon = 1e-9);
        }
    }

    #[test]
    fn angle_of_half_turn_is_pi() {
        let r = rot_x(PI);
        assert_relative_eq!(rotation_angle(&r), PI, epsilon = 1e-12);
    }

    #[test]
    fn projection_fixes_skewed_frames() {
        let mut m = rot_z(0.4) * rot_x(-0.2);
        m[(0, 1)] += 0.05;
        m[(2, 2)] *= 1.1;
        let r = project_to_rotation(&m);
        assert!(RigidTransform::from_rotation(r).is_rigid(1e-12));
        // a reflection is returned as a proper rotation
        let refl = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert_relative_eq!(project_to_rotation(&refl).determinant(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn inverse_composes_to_identity() {
        let t = RigidTransform::new(rot_y(0.3) * rot_z(1.1), Vector3::new(1.0, -2.0, 3.5));
        let i = t * t.inverse();
        assert_relative_eq!(i.rotation, Matrix3::identity(), epsilon = 1e-12);
        assert_relative_eq!(i.translation.norm(), 0.0, epsilon = 1e-12);
        let h = RigidTransform::from_homogeneous(&t.to_homogeneous());
        assert_eq!(h, t);
    }
}
