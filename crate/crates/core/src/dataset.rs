//! Command trajectories from random joint-space waypoints, plant-driven
//! collection of (command, physical) pairs, temporal splits and CSV storage.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::kinematics::{JointConfig, ManipulatorSpec, ReducedJointConfig};
use crate::perception::{perceive_joint_config, MarkerRig, PerceptionConfig};
use crate::plant::HysteresisPlant;

/// Per-joint interpolation step (deg); consecutive points are `step·√5`
/// apart in the 5-D joint space.
pub const DEFAULT_STEP_DEG: f64 = 3.0;
pub const FULL_SCALE_WAYPOINTS: usize = 1802;
/// Sized so the 80% training split holds roughly 2,500 pairs.
pub const DESK_SCALE_WAYPOINTS: usize = 240;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("need at least {need} items, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("waypoint {index} is outside the joint limits")]
    OutOfLimits { index: usize },
    #[error("dataset I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset format: {0}")]
    Format(String),
    #[error("metadata: {0}")]
    Meta(#[from] serde_json::Error),
}

/// Uniform random admissible configurations (`q4 ≤ q5`), kept `margin` deg
/// inside every limit.
pub fn random_waypoints<R: Rng + ?Sized>(count: usize, spec: &ManipulatorSpec, margin: f64, rng: &mut R) -> Vec<JointConfig> {
    (0..count)
        .map(|_| {
            let mut q = JointConfig(std::array::from_fn(|j| {
                let [lo, hi] = spec.joint_limits[j];
                rng.random_range(lo + margin..hi - margin)
            }));
            if q[3] > q[4] {
                q.0.swap(3, 4);
            }
            q
        })
        .collect()
}

/// Inserts points spaced exactly `step·√5` apart along each straight segment;
/// every waypoint is kept and the last gap of a segment is the remainder.
/// Repeated waypoints contribute nothing.
pub fn interpolate(waypoints: &[JointConfig], step_deg: f64) -> Result<Vec<JointConfig>, DatasetError> {
    if waypoints.len() < 2 {
        return Err(DatasetError::TooShort { need: 2, got: waypoints.len() });
    }
    let spacing = step_deg * 5f64.sqrt();
    let mut out = vec![waypoints[0]];
    for pair in waypoints.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let delta = b.sub(&a);
        let dist = delta.norm();
        if dist == 0.0 {
            continue;
        }
        let count = (dist / spacing).floor() as usize;
        for j in 1..=count {
            let s = j as f64 * spacing;
            // the j-th point coincides with the far waypoint when ‖Δ‖ is an exact multiple
            if s >= dist - 1e-9 {
                break;
            }
            out.push(a.add(&delta.scale(s / dist)));
        }
        out.push(b);
    }
    Ok(out)
}

/// A random command sequence of exactly `steps` points, built the same way
/// as a collection trajectory.
pub fn random_command_sequence<R: Rng + ?Sized>(steps: usize, spec: &ManipulatorSpec, rng: &mut R) -> Vec<JointConfig> {
    let mut out: Vec<JointConfig> = Vec::with_capacity(steps + 64);
    let mut last = random_waypoints(1, spec, 0.5, rng)[0];
    out.push(last);
    while out.len() < steps {
        let next = random_waypoints(1, spec, 0.5, rng)[0];
        let seg = interpolate(&[last, next], DEFAULT_STEP_DEG).expect("two waypoints");
        out.extend_from_slice(&seg[1..]);
        last = next;
    }
    out.truncate(steps);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub cmd: JointConfig,
    pub phy: JointConfig,
    /// false when the physical estimate was dropped and carried forward
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Full,
    Train,
    Val,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub plant_fingerprint: String,
    pub perception: bool,
    pub waypoints: usize,
    pub step_deg: f64,
    /// hash of the run configuration that produced the data
    pub config_hash: String,
    pub split: SplitTag,
    /// index of the first pair in the parent dataset
    pub offset: usize,
}

impl Default for DatasetMeta {
    fn default() -> Self {
        Self {
            seed: 42,
            plant_fingerprint: String::new(),
            perception: false,
            waypoints: 0,
            step_deg: DEFAULT_STEP_DEG,
            config_hash: String::new(),
            split: SplitTag::Full,
            offset: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisDataset {
    pub pairs: Vec<Pair>,
    pub meta: DatasetMeta,
}

impl HysteresisDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn commands(&self) -> Vec<JointConfig> {
        self.pairs.iter().map(|p| p.cmd).collect()
    }

    pub fn physical(&self) -> Vec<JointConfig> {
        self.pairs.iter().map(|p| p.phy).collect()
    }

    /// Per-joint MAE and SD of `|q_phy − q_cmd|`.
    pub fn error_stats(&self) -> ([f64; 5], [f64; 5]) {
        crate::plant::error_stats(&self.commands(), &self.physical())
    }

    /// SHA-256 of the canonical CSV encoding.
    pub fn hash(&self) -> String {
        let mut buf = Vec::new();
        write_pairs(&mut buf, &self.pairs).expect("in-memory write");
        hex::encode(Sha256::digest(&buf))
    }
}

/// Optional sensing stage between the plant and the recorded physical angle.
pub struct PerceptionStage<'a> {
    pub spec: &'a ManipulatorSpec,
    pub rig: &'a MarkerRig,
    pub config: &'a PerceptionConfig,
}

/// Drives `plant` through `trajectory` in order and records the pairs. With a
/// perception stage, failed estimates are flagged invalid and carry the last
/// valid estimate forward.
pub fn collect<R: Rng + ?Sized>(
    trajectory: &[JointConfig],
    plant: &mut HysteresisPlant,
    perception: Option<&PerceptionStage<'_>>,
    rng: &mut R,
) -> HysteresisDataset {
    let mut pairs = Vec::with_capacity(trajectory.len());
    let mut last_valid = JointConfig::ZERO;
    let mut seed = ReducedJointConfig::ZERO;
    for cmd in trajectory {
        let truth = plant.step(cmd);
        let (phy, valid) = match perception {
            None => (truth, true),
            Some(stage) => match perceive_joint_config(&truth, &seed, stage.spec, stage.rig, stage.config, rng) {
                Ok(q) => {
                    seed = q.reduced();
                    last_valid = q;
                    (q, true)
                }
                Err(e) => {
                    log::debug!("dropped perception frame: {e}");
                    (last_valid, false)
                }
            },
        };
        pairs.push(Pair { cmd: *cmd, phy, valid });
    }
    let meta = DatasetMeta {
        seed: plant.params.seed,
        plant_fingerprint: plant.params.fingerprint(),
        perception: perception.is_some(),
        ..DatasetMeta::default()
    };
    HysteresisDataset { pairs, meta }
}

/// Number of training pairs for a contiguous split.
pub fn train_count(n: usize, train_frac: f64) -> usize {
    ((n as f64 * train_frac + 1e-9).floor() as usize).min(n)
}

/// Contiguous temporal split: the first `train_frac` of the pairs train.
pub fn split(dataset: &HysteresisDataset, train_frac: f64) -> Result<(HysteresisDataset, HysteresisDataset), DatasetError> {
    if dataset.is_empty() {
        return Err(DatasetError::TooShort { need: 1, got: 0 });
    }
    let k = train_count(dataset.len(), train_frac);
    let part = |pairs: &[Pair], tag, offset| HysteresisDataset {
        pairs: pairs.to_vec(),
        meta: DatasetMeta { split: tag, offset: dataset.meta.offset + offset, ..dataset.meta.clone() },
    };
    Ok((part(&dataset.pairs[..k], SplitTag::Train, 0), part(&dataset.pairs[k..], SplitTag::Val, k)))
}

const HEADER: &str = "t,q1_cmd,q2_cmd,q3_cmd,q4_cmd,q5_cmd,q1_phy,q2_phy,q3_phy,q4_phy,q5_phy,valid";

fn write_pairs<W: Write>(w: &mut W, pairs: &[Pair]) -> std::io::Result<()> {
    writeln!(w, "{HEADER}")?;
    for (t, p) in pairs.iter().enumerate() {
        write!(w, "{t}")?;
        for v in p.cmd.0.iter().chain(p.phy.0.iter()) {
            // shortest representation that parses back to the same bits
            write!(w, ",{v}")?;
        }
        writeln!(w, ",{}", u8::from(p.valid))?;
    }
    Ok(())
}

pub fn meta_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MetaFile {
    #[serde(flatten)]
    meta: DatasetMeta,
    pairs: usize,
    sha256: String,
}

/// Writes the CSV and its metadata sidecar; returns the data hash.
pub fn write_dataset(path: &Path, dataset: &HysteresisDataset) -> Result<String, DatasetError> {
    let mut buf = Vec::new();
    write_pairs(&mut buf, &dataset.pairs)?;
    let sha = hex::encode(Sha256::digest(&buf));
    std::fs::write(path, &buf)?;
    let meta = MetaFile { meta: dataset.meta.clone(), pairs: dataset.len(), sha256: sha.clone() };
    std::fs::write(meta_path(path), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(sha)
}

pub fn read_dataset(path: &Path) -> Result<HysteresisDataset, DatasetError> {
    let file = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != HEADER {
        return Err(DatasetError::Format(format!("unexpected header {header:?}")));
    }
    let mut pairs = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 12 {
            return Err(DatasetError::Format(format!("row {i}: expected 12 columns, got {}", cols.len())));
        }
        let num = |k: usize| -> Result<f64, DatasetError> {
            cols[k].trim().parse().map_err(|_| DatasetError::Format(format!("row {i}: bad number {:?}", cols[k])))
        };
        let mut cmd = JointConfig::ZERO;
        let mut phy = JointConfig::ZERO;
        for j in 0..5 {
            cmd[j] = num(1 + j)?;
            phy[j] = num(6 + j)?;
        }
        let valid = match cols[11].trim() {
            "1" => true,
            "0" => false,
            other => return Err(DatasetError::Format(format!("row {i}: bad valid flag {other:?}"))),
        };
        pairs.push(Pair { cmd, phy, valid });
    }
    let meta = match std::fs::read_to_string(meta_path(path)) {
        Ok(s) => serde_json::from_str::<MetaFile>(&s)?.meta,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => DatasetMeta::default(),
        Err(e) => return Err(e.into()),
    };
    Ok(HysteresisDataset { pairs, meta })
}
