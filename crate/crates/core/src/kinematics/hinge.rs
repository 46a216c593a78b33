//! Flexure-hinge module geometry and the modified Denavit–Hartenberg frames of
//! one module.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::transform::RigidTransform;

/// Below this bend angle (rad) the `sin(θ/2)/θ` terms switch to their Taylor series.
pub const SERIES_THRESHOLD: f64 = 1e-4;

/// Notched flexure-hinge dimensions, all in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlexureHingeParams {
    /// height between notches
    pub h: f64,
    /// disk thickness
    pub l: f64,
    /// hinge round radius
    pub round_radius: f64,
    /// front thickness
    pub t: f64,
    /// side thickness
    pub b: f64,
    /// module radius
    pub r: f64,
}

impl Default for FlexureHingeParams {
    fn default() -> Self {
        Self { h: 0.5, l: 0.7, round_radius: 0.35, t: 0.4, b: 1.3, r: 2.4 }
    }
}

impl FlexureHingeParams {
    pub fn is_valid(&self) -> bool {
        [self.h, self.l, self.round_radius, self.t, self.b, self.r]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
    }
}

/// Equivalent link length of one bent hinge: `l·cos(θ/2) + (2h/θ)·sin(θ/2)`.
///
/// Even in `θ`; equals `l + h` at `θ = 0`.
pub fn tr_length(theta: f64, hinge: &FlexureHingeParams) -> f64 {
    let half = 0.5 * theta;
    let chord = if theta.abs() < SERIES_THRESHOLD {
        let t2 = theta * theta;
        hinge.h * (1.0 - t2 / 24.0 + t2 * t2 / 1920.0)
    } else {
        2.0 * hinge.h / theta * half.sin()
    };
    hinge.l * half.cos() + chord
}

/// One row of the modified DH table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DhRow {
    /// twist `α_{k−1}` (rad)
    pub alpha: f64,
    /// link length `a_{k−1}` (mm)
    pub a: f64,
    /// offset `d_k` (mm)
    pub d: f64,
    /// joint angle `θ_k` (rad)
    pub theta: f64,
}

impl DhRow {
    pub const fn new(alpha: f64, a: f64, d: f64, theta: f64) -> Self {
        Self { alpha, a, d, theta }
    }
}

/// Modified-DH transform `Rot_x(α)·Trans_x(a)·Rot_z(θ)·Trans_z(d)`, written out.
pub fn dh_transform(row: &DhRow) -> RigidTransform {
    let (st, ct) = row.theta.sin_cos();
    let (sa, ca) = row.alpha.sin_cos();
    let rotation = Matrix3::new(
        ct, -st, 0.0, //
        st * ca, ct * ca, -sa, //
        st * sa, ct * sa, ca,
    );
    let translation = Vector3::new(row.a, -row.d * sa, row.d * ca);
    RigidTransform { rotation, translation }
}

/// The eight DH rows of a segment-1 module (pitch hinge then yaw hinge).
pub fn seg1_module_rows(theta_p: f64, theta_y: f64, hinge: &FlexureHingeParams) -> [DhRow; 8] {
    let tr_p = tr_length(theta_p, hinge);
    let tr_y = tr_length(theta_y, hinge);
    [
        DhRow::new(FRAC_PI_2, 0.0, 0.0, 0.0),
        DhRow::new(0.0, 0.0, 0.0, theta_p / 2.0),
        DhRow::new(0.0, tr_p, 0.0, 0.0),
        DhRow::new(0.0, 0.0, 0.0, theta_p / 2.0),
        DhRow::new(-FRAC_PI_2, 0.0, 0.0, 0.0),
        DhRow::new(0.0, 0.0, 0.0, theta_y / 2.0),
        DhRow::new(0.0, tr_y, 0.0, 0.0),
        DhRow::new(0.0, 0.0, 0.0, theta_y / 2.0),
    ]
}

/// Rows 2–4 of the module table: a single pitch hinge (segment 2).
pub fn seg2_module_rows(theta_p: f64, hinge: &FlexureHingeParams) -> [DhRow; 3] {
    let rows = seg1_module_rows(theta_p, 0.0, hinge);
    [rows[1], rows[2], rows[3]]
}

fn chain(rows: &[DhRow]) -> RigidTransform {
    rows.iter().fold(RigidTransform::identity(), |acc, row| acc * dh_transform(row))
}

/// Transform across one segment-1 module for per-module pitch/yaw bends (rad).
/// The module axis is the local x axis.
pub fn module_transform_seg1(theta_p: f64, theta_y: f64, hinge: &FlexureHingeParams) -> RigidTransform {
    chain(&seg1_module_rows(theta_p, theta_y, hinge))
}

/// Transform across one segment-2 module (pitch only).
pub fn module_transform_seg2(theta_p: f64, hinge: &FlexureHingeParams) -> RigidTransform {
    chain(&seg2_module_rows(theta_p, hinge))
}
