use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::kinematics::{forward_kinematics, position_ik_damped, IkOptions, JointConfig, ManipulatorSpec, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Random,
    Circle,
    Zigzag,
}

impl TrajectoryKind {
    pub const ALL: [TrajectoryKind; 3] = [TrajectoryKind::Random, TrajectoryKind::Circle, TrajectoryKind::Zigzag];

    pub fn as_str(&self) -> &'static str {
        match self {
            TrajectoryKind::Random => "random",
            TrajectoryKind::Circle => "circle",
            TrajectoryKind::Zigzag => "zigzag",
        }
    }
}

impl fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrajectoryKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(TrajectoryKind::Random),
            "circle" | "circular" => Ok(TrajectoryKind::Circle),
            "zigzag" => Ok(TrajectoryKind::Zigzag),
            other => Err(format!("unknown trajectory kind `{other}` (random | circle | zigzag)")),
        }
    }
}

/// Shape and sampling of the evaluation paths. Sizes are in mm, angles in deg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrajectoryParams {
    pub samples: usize,
    /// circle radius; zigzag and random half-extent in the plane
    pub size: f64,
    /// random-path half-extent along the base axis
    pub depth: f64,
    pub loops: f64,
    /// zigzag direction reversals
    pub vertices: usize,
    /// random-path spline control points
    pub control_points: usize,
    /// range of the segment-1 bend magnitude at the path centre
    pub center_bend: [f64; 2],
    /// smallest |q1| and |q2| at the path centre
    pub center_min_abs: f64,
    pub center_q3: f64,
    pub center_yaw: f64,
    pub yaw_amplitude: f64,
    pub grip_center: f64,
    pub grip_amplitude: f64,
    /// joint-motion penalty of the target solve (mm per deg)
    pub ik_damping: f64,
    /// largest accepted distance between a path sample and its target (mm)
    pub reach_tolerance: f64,
    /// largest accepted joint jump between consecutive samples
    pub max_step_deg: f64,
    /// minimum joint-space distance from every training waypoint
    pub unseen_distance: f64,
    pub max_attempts: usize,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        Self::for_spec(&ManipulatorSpec::default())
    }
}

impl TrajectoryParams {
    /// Sizes scaled to the lateral reach of `spec`.
    pub fn for_spec(spec: &ManipulatorSpec) -> Self {
        let (lo, hi) = workspace_envelope(spec);
        let lateral = 0.5 * (hi.x - lo.x).min(hi.y - lo.y);
        Self {
            samples: 60,
            size: 0.23 * lateral,
            depth: 0.03 * lateral,
            loops: 2.0,
            vertices: 6,
            control_points: 7,
            center_bend: [10.0, 20.0],
            center_min_abs: 7.0,
            center_q3: 5.0,
            center_yaw: 15.0,
            yaw_amplitude: 20.0,
            grip_center: 30.0,
            grip_amplitude: 10.0,
            ik_damping: 0.05,
            reach_tolerance: 2.0,
            max_step_deg: 15.0,
            unseen_distance: 3.0 * 5f64.sqrt(),
            max_attempts: 200,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: &str| Err(EvalError::InvalidParams(m.into()));
        if self.samples < 2 {
            return bad("need at least 2 samples");
        }
        if !(self.size >= 0.0 && self.depth >= 0.0 && self.loops > 0.0) {
            return bad("size and depth must be ≥ 0, loops > 0");
        }
        if self.vertices < 1 || self.control_points < 2 {
            return bad("zigzag needs ≥ 1 vertex and random paths ≥ 2 control points");
        }
        if !(self.center_bend[0] >= 0.0 && self.center_bend[0] <= self.center_bend[1]) {
            return bad("center_bend must be an ordered non-negative range");
        }
        if !(self.center_min_abs >= 0.0 && self.center_min_abs * std::f64::consts::SQRT_2 <= self.center_bend[1]) {
            return bad("center_min_abs must be reachable within center_bend");
        }
        if self.grip_center - self.grip_amplitude < 0.0 {
            return bad("grip must stay non-negative");
        }
        if self.max_attempts < 1 {
            return bad("max_attempts must be ≥ 1");
        }
        Ok(())
    }
}

/// Axis-aligned box of end-effector positions over the limit corners and
/// midpoints of `(q1, q2, q3)`.
pub fn workspace_envelope(spec: &ManipulatorSpec) -> (Vector3<f64>, Vector3<f64>) {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    let level = |j: usize, k: usize| {
        let [a, b] = spec.joint_limits[j];
        [a, 0.5 * (a + b), b][k]
    };
    for i in 0..27 {
        let q = JointConfig::new(level(0, i % 3), level(1, i / 3 % 3), level(2, i / 9), 0.0, 0.0);
        let p = forward_kinematics(&q, spec).translation;
        lo = lo.inf(&p);
        hi = hi.sup(&p);
    }
    (lo, hi)
}

/// An evaluation path: the commanded task-space samples, the joint targets
/// solved from them and the end-effector poses those targets produce.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskTrajectory {
    pub kind: TrajectoryKind,
    /// task-space samples before IK
    pub path: Vec<Vector3<f64>>,
    pub joints: Vec<JointConfig>,
    pub targets: Vec<RigidTransform>,
    /// path centre
    pub origin: Vector3<f64>,
    /// in-plane axes and plane normal of the path
    pub axes: [Vector3<f64>; 3],
}

impl TaskTrajectory {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// `[x, y, z, yaw, grip]` relative to the path centre.
type Sample = [f64; 5];

fn catmull_rom(points: &[Sample], n: usize) -> Vec<Sample> {
    let k = points.len();
    let at = |i: isize| points[i.clamp(0, k as isize - 1) as usize];
    (0..n)
        .map(|s| {
            let u = s as f64 / (n - 1) as f64 * (k - 1) as f64;
            let seg = (u.floor() as isize).min(k as isize - 2);
            let t = u - seg as f64;
            let (p0, p1, p2, p3) = (at(seg - 1), at(seg), at(seg + 1), at(seg + 2));
            std::array::from_fn(|d| {
                0.5 * (2.0 * p1[d]
                    + (p2[d] - p0[d]) * t
                    + (2.0 * p0[d] - 5.0 * p1[d] + 4.0 * p2[d] - p3[d]) * t * t
                    + (3.0 * p1[d] - p0[d] - 3.0 * p2[d] + p3[d]) * t * t * t)
            })
        })
        .collect()
}

/// Points at equal arc length along a planar polyline.
fn resample_polyline(vertices: &[[f64; 2]], n: usize) -> Vec<[f64; 2]> {
    let seg_len: Vec<f64> = vertices.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).collect();
    let total: f64 = seg_len.iter().sum();
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    let mut start = 0.0;
    for s in 0..n {
        let d = total * s as f64 / (n - 1) as f64;
        while seg + 1 < seg_len.len() && d > start + seg_len[seg] {
            start += seg_len[seg];
            seg += 1;
        }
        let t = if seg_len[seg] > 0.0 { ((d - start) / seg_len[seg]).clamp(0.0, 1.0) } else { 0.0 };
        let (a, b) = (vertices[seg], vertices[seg + 1]);
        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
    }
    out
}

fn shape<R: Rng + ?Sized>(kind: TrajectoryKind, p: &TrajectoryParams, rng: &mut R) -> Vec<Sample> {
    let n = p.samples;
    match kind {
        TrajectoryKind::Circle => (0..n)
            .map(|i| {
                let phi = TAU * p.loops * i as f64 / n as f64;
                [
                    p.size * phi.cos(),
                    p.size * phi.sin(),
                    0.0,
                    p.yaw_amplitude * phi.sin(),
                    p.grip_amplitude * (2.0 * phi).sin(),
                ]
            })
            .collect(),
        TrajectoryKind::Zigzag => {
            let v = p.vertices;
            let vertices: Vec<[f64; 2]> = (0..=v + 1)
                .map(|i| {
                    let x = -p.size + 2.0 * p.size * i as f64 / (v + 1) as f64;
                    let y = if i == 0 || i == v + 1 { 0.0 } else if i % 2 == 1 { p.size } else { -p.size };
                    [x, y]
                })
                .collect();
            resample_polyline(&vertices, n)
                .into_iter()
                .map(|[x, y]| {
                    let u = if p.size > 0.0 { y / p.size } else { 0.0 };
                    [x, y, 0.0, p.yaw_amplitude * u, -p.grip_amplitude * u]
                })
                .collect()
        }
        TrajectoryKind::Random => {
            let mut ctrl: Vec<Sample> = (0..p.control_points)
                .map(|_| {
                    let mut u = || rng.random_range(-1.0..=1.0);
                    [p.size * u(), p.size * u(), p.depth * u(), p.yaw_amplitude * u(), p.grip_amplitude * u()]
                })
                .collect();
            ctrl[0] = [0.0; 5];
            catmull_rom(&ctrl, n)
        }
    }
}

/// Orthonormal `(u, v, n)` at `center`: `u` and `v` span the plane in which
/// the tip moves most per degree of `(q1, q2, q3)`, `n` is its normal.
pub fn tangent_plane(center: &JointConfig, spec: &ManipulatorSpec) -> [Vector3<f64>; 3] {
    let h = 1e-4;
    let mut jac = Matrix3::zeros();
    for k in 0..3 {
        let (mut a, mut b) = (*center, *center);
        a.0[k] += h;
        b.0[k] -= h;
        let d = (forward_kinematics(&a, spec).translation - forward_kinematics(&b, spec).translation) / (2.0 * h);
        jac.set_column(k, &d);
    }
    let svd = jac.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let e1 = u.column(order[0]).into_owned();
    let e2 = u.column(order[1]).into_owned();
    // fix signs so the basis is deterministic and right-handed
    let e1 = if e1.x < 0.0 { -e1 } else { e1 };
    let e2 = if e2.y < 0.0 { -e2 } else { e2 };
    [e1, e2, e1.cross(&e2)]
}

fn solve_joints(
    shape: &[Sample],
    center: &JointConfig,
    frame: &[Vector3<f64>; 3],
    p: &TrajectoryParams,
    spec: &ManipulatorSpec,
) -> Result<(Vec<Vector3<f64>>, Vec<JointConfig>), usize> {
    let opts = IkOptions::default();
    let origin = forward_kinematics(center, spec).translation;
    let mut seed = [center[0], center[1], center[2]];
    let mut prev: Option<JointConfig> = None;
    let mut path = Vec::with_capacity(shape.len());
    let mut joints = Vec::with_capacity(shape.len());
    for (i, s) in shape.iter().enumerate() {
        let target = origin + frame[0] * s[0] + frame[1] * s[1] + frame[2] * s[2];
        let yaw = center.yaw() + s[3];
        let grip = center.grip() + s[4];
        let (q123, miss) = position_ik_damped(&target, seed, [center[0], center[1], center[2]], yaw, grip, p.ik_damping, spec, &opts);
        if miss > p.reach_tolerance {
            return Err(i);
        }
        let q = JointConfig::new(q123[0], q123[1], q123[2], yaw - 0.5 * grip, yaw + 0.5 * grip);
        if !q.is_admissible(spec) {
            return Err(i);
        }
        if let Some(last) = prev {
            if q.sub(&last).max_abs() > p.max_step_deg {
                return Err(i);
            }
        }
        seed = q123;
        prev = Some(q);
        path.push(target);
        joints.push(q);
    }
    Ok((path, joints))
}

/// Builds a path of `kind` around a random bent configuration, solves joint
/// targets with continuity seeding and retries with a fresh centre until
/// every target is reachable and farther than `unseen_distance` from all of
/// `avoid`.
pub fn make_trajectory<R: Rng + ?Sized>(
    kind: TrajectoryKind,
    params: &TrajectoryParams,
    spec: &ManipulatorSpec,
    avoid: &[JointConfig],
    rng: &mut R,
) -> Result<TaskTrajectory, EvalError> {
    params.validate()?;
    let mut worst = 0;
    for _ in 0..params.max_attempts {
        let (bend, dir) = loop {
            let bend = rng.random_range(params.center_bend[0]..=params.center_bend[1]);
            let dir: f64 = rng.random_range(0.0..TAU);
            if (bend * dir.cos()).abs() >= params.center_min_abs && (bend * dir.sin()).abs() >= params.center_min_abs {
                break (bend, dir);
            }
        };
        let yaw = rng.random_range(-params.center_yaw..=params.center_yaw);
        let grip = params.grip_center;
        let center = JointConfig::new(
            bend * dir.cos(),
            bend * dir.sin(),
            rng.random_range(-params.center_q3..=params.center_q3),
            yaw - 0.5 * grip,
            yaw + 0.5 * grip,
        );
        let samples = shape(kind, params, rng);
        let frame = tangent_plane(&center, spec);
        let (path, joints) = match solve_joints(&samples, &center, &frame, params, spec) {
            Ok(v) => v,
            Err(i) => {
                worst = worst.max(i);
                continue;
            }
        };
        let seen = joints
            .iter()
            .any(|q| avoid.iter().any(|w| q.sub(w).norm() <= params.unseen_distance));
        if seen {
            continue;
        }
        let targets = joints.iter().map(|q| forward_kinematics(q, spec)).collect();
        let origin = forward_kinematics(&center, spec).translation;
        return Ok(TaskTrajectory { kind, path, joints, targets, origin, axes: frame });
    }
    Err(EvalError::Unreachable { sample: worst, attempts: params.max_attempts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn params(samples: usize) -> TrajectoryParams {
        TrajectoryParams { samples, ..TrajectoryParams::default() }
    }

    #[test]
    fn circle_lies_on_its_plane() {
        let spec = ManipulatorSpec::default();
        let t = make_trajectory(TrajectoryKind::Circle, &params(60), &spec, &[], &mut stream(1, "t")).unwrap();
        for p in &t.path {
            assert!((p - t.origin).dot(&t.axes[2]).abs() < 1e-9);
            assert!(((p - t.origin).norm() - params(60).size).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_radius_circle_is_constant() {
        let spec = ManipulatorSpec::default();
        let p = TrajectoryParams { size: 0.0, yaw_amplitude: 0.0, grip_amplitude: 0.0, ..params(20) };
        let t = make_trajectory(TrajectoryKind::Circle, &p, &spec, &[], &mut stream(2, "t")).unwrap();
        for q in &t.joints {
            assert!(q.sub(&t.joints[0]).max_abs() < 1e-9);
        }
    }

    #[test]
    fn zigzag_reverses_once_per_vertex() {
        let spec = ManipulatorSpec::default();
        for vertices in [1, 4, 7] {
            let p = TrajectoryParams { vertices, ..params(150) };
            let t = make_trajectory(TrajectoryKind::Zigzag, &p, &spec, &[], &mut stream(3, "t")).unwrap();
            let dy: Vec<f64> = t.path.windows(2).map(|w| (w[1] - w[0]).dot(&t.axes[1])).filter(|d| d.abs() > 1e-12).collect();
            let reversals = dy.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
            assert_eq!(reversals, vertices);
        }
    }

    #[test]
    fn targets_match_the_path_and_stay_admissible() {
        let spec = ManipulatorSpec::default();
        let p = params(80);
        for kind in TrajectoryKind::ALL {
            let t = make_trajectory(kind, &p, &spec, &[], &mut stream(4, kind.as_str())).unwrap();
            assert_eq!(t.len(), 80);
            for ((x, q), pose) in t.path.iter().zip(&t.joints).zip(&t.targets) {
                assert!(q.is_admissible(&spec));
                assert!((pose.translation - x).norm() <= p.reach_tolerance);
                assert_eq!(*pose, forward_kinematics(q, &spec));
            }
        }
    }

    #[test]
    fn trajectories_avoid_training_waypoints() {
        let spec = ManipulatorSpec::default();
        let mut rng = stream(5, "w");
        let waypoints = crate::dataset::random_waypoints(185, &spec, 0.0, &mut rng);
        let p = params(80);
        let t = make_trajectory(TrajectoryKind::Random, &p, &spec, &waypoints, &mut stream(5, "t")).unwrap();
        for q in &t.joints {
            for w in &waypoints {
                assert!(q.sub(w).norm() > p.unseen_distance);
            }
        }
    }

    #[test]
    fn kinds_parse() {
        for k in TrajectoryKind::ALL {
            assert_eq!(k.as_str().parse::<TrajectoryKind>().unwrap(), k);
        }
        assert!("spiral".parse::<TrajectoryKind>().is_err());
    }
}
