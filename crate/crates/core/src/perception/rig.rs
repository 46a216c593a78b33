use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::PerceptionError;
use crate::kinematics::{rot_x, RigidTransform};

/// Marker ids: three on the base, two per jaw.
pub const MARKER_IDS: [&str; 7] = ["r0", "r1", "b0", "r2", "b1", "y0", "g0"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkerMount {
    Base,
    LeftJaw,
    RightJaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub id: String,
    /// mm
    pub radius: f64,
    pub mount: MarkerMount,
    /// centre in the mount frame (mm); jaw frames have their origin at the tip
    pub offset: Vector3<f64>,
}

/// Which side the occlusion-offset correction `R_x(ψ)` multiplies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsiConvention {
    /// `R ← R·R_x(ψ)`: the offset is a rotation about the jaw's own x axis.
    #[default]
    Body,
    /// `R ← R_x(ψ)·R`: rotation about the camera x axis.
    Camera,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarkerRig {
    pub markers: Vec<Marker>,
    /// base-marker midpoint to robot base, in the base frame (mm)
    pub l_base: Vector3<f64>,
    /// back marker to jaw tip, in the corrected jaw frame (mm)
    pub l_fcps1: Vector3<f64>,
    pub l_fcps2: Vector3<f64>,
    /// rad
    pub psi: f64,
    pub psi_convention: PsiConvention,
    /// rotation centre to jaw tip (mm)
    pub d_fcps: f64,
    /// robot base pose in the camera frame
    pub base_in_camera: RigidTransform,
}

impl Default for MarkerRig {
    fn default() -> Self {
        Self::standard(10.0_f64.to_radians(), 10.0)
    }
}

impl MarkerRig {
    /// Layout used throughout: base markers 30 mm apart with the blue one
    /// 20 mm above, jaw markers 6 mm apart along each jaw and offset ±3 mm in
    /// the jaw plane, tilted by `ψ` about the jaw x axis.
    pub fn standard(psi: f64, d_fcps: f64) -> Self {
        let base_r = 4.0;
        let fcps_r = 2.0;
        let spacing = 30.0;
        let height = 20.0;
        let l_base = Vector3::new(0.0, 0.0, -15.0);
        let (o, back, sep) = (3.0, 9.0, 6.0);
        let tilt = rot_x(-psi) * Vector3::z() * sep;

        let mid = -l_base;
        let r0 = mid - Vector3::y() * (spacing / 2.0);
        let r1 = mid + Vector3::y() * (spacing / 2.0);
        let b0 = r1 + Vector3::z() * height;
        let b1 = Vector3::new(0.0, o, -back);
        let y0 = Vector3::new(0.0, -o, -back);
        let m = |id: &str, radius, mount, offset| Marker { id: id.into(), radius, mount, offset };
        let markers = vec![
            m("r0", base_r, MarkerMount::Base, r0),
            m("r1", base_r, MarkerMount::Base, r1),
            m("b0", base_r, MarkerMount::Base, b0),
            m("r2", fcps_r, MarkerMount::LeftJaw, b1 + tilt),
            m("b1", fcps_r, MarkerMount::LeftJaw, b1),
            m("y0", fcps_r, MarkerMount::RightJaw, y0),
            m("g0", fcps_r, MarkerMount::RightJaw, y0 + tilt),
        ];
        let base_in_camera =
            RigidTransform::new(rot_x(std::f64::consts::FRAC_PI_2), Vector3::new(0.0, 40.0, 300.0));
        Self {
            markers,
            l_base,
            l_fcps1: -b1,
            l_fcps2: -y0,
            psi,
            psi_convention: PsiConvention::Body,
            d_fcps,
            base_in_camera,
        }
    }

    pub fn marker(&self, id: &str) -> Option<&Marker> {
        self.markers.iter().find(|m| m.id == id)
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        if self.markers.len() != 7 {
            return Err(PerceptionError::InvalidRig(format!("expected 7 markers, got {}", self.markers.len())));
        }
        for id in MARKER_IDS {
            let m = self.marker(id).ok_or_else(|| PerceptionError::InvalidRig(format!("marker {id} missing")))?;
            if !(m.radius > 0.0) {
                return Err(PerceptionError::InvalidRig(format!("marker {id} radius must be > 0")));
            }
        }
        let base = self.markers.iter().filter(|m| m.mount == MarkerMount::Base).count();
        if base != 3 {
            return Err(PerceptionError::InvalidRig(format!("base needs 3 markers, has {base}")));
        }
        if !(self.d_fcps > 0.0) || !self.psi.is_finite() {
            return Err(PerceptionError::InvalidRig("d_fcps must be > 0 and ψ finite".into()));
        }
        Ok(())
    }
}
