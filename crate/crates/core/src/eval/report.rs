use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{EvalError, TrackMode, TrackingReport, TrajectoryKind};
use crate::kinematics::JOINT_NAMES;

/// Calibrated over uncalibrated mean error for one trajectory kind, or for
/// all kinds pooled when `kind` is `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Improvement {
    pub kind: Option<TrajectoryKind>,
    pub position_ratio: f64,
    pub orientation_ratio: f64,
}

impl Improvement {
    pub fn label(&self) -> &'static str {
        self.kind.map_or("combined", |k| k.as_str())
    }
}

fn pooled(reports: &[&TrackingReport]) -> (f64, f64) {
    let n: usize = reports.iter().map(|r| r.records.len()).sum();
    let pos: f64 = reports.iter().flat_map(|r| &r.records).map(|s| s.position_error_norm()).sum();
    let ori: f64 = reports.iter().flat_map(|r| &r.records).map(|s| s.orientation_error).sum();
    (pos / n as f64, ori / n as f64)
}

/// Per-kind ratios for every kind present in both modes, followed by the
/// pooled ratio over those kinds.
pub fn improvement(reports: &[TrackingReport]) -> Vec<Improvement> {
    let mut kinds: Vec<TrajectoryKind> = reports.iter().map(|r| r.kind).collect();
    kinds.sort();
    kinds.dedup();
    let find = |k: TrajectoryKind, m: TrackMode| reports.iter().find(|r| r.kind == k && r.mode == m && !r.is_empty());
    let mut out = Vec::new();
    let (mut cal, mut unc) = (Vec::new(), Vec::new());
    for k in kinds {
        if let (Some(u), Some(c)) = (find(k, TrackMode::Uncalibrated), find(k, TrackMode::Calibrated)) {
            let (up, uo) = pooled(&[u]);
            let (cp, co) = pooled(&[c]);
            out.push(Improvement { kind: Some(k), position_ratio: cp / up, orientation_ratio: co / uo });
            unc.push(u);
            cal.push(c);
        }
    }
    if !cal.is_empty() {
        let (up, uo) = pooled(&unc);
        let (cp, co) = pooled(&cal);
        out.push(Improvement { kind: None, position_ratio: cp / up, orientation_ratio: co / uo });
    }
    out
}

/// Plain-text position/orientation and joint-error tables.
pub fn render_table(reports: &[TrackingReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Position and orientation errors (MAE ± SD)");
    let _ = writeln!(
        s,
        "{:<8} {:<13} {:>7} {:>7} {:>7} {:>17} {:>17}",
        "path", "mode", "x (mm)", "y (mm)", "z (mm)", "total (mm)", "orientation (deg)"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<8} {:<13} {:>7.3} {:>7.3} {:>7.3} {:>8.3} ± {:<6.3} {:>8.3} ± {:<6.3}",
            r.kind.as_str(),
            r.mode.as_str(),
            r.axis_mae[0],
            r.axis_mae[1],
            r.axis_mae[2],
            r.position_mae,
            r.position_sd,
            r.orientation_mae,
            r.orientation_sd
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "Joint angle errors in deg (MAE ± SD)");
    let _ = write!(s, "{:<8} {:<13}", "path", "mode");
    for name in JOINT_NAMES {
        let _ = write!(s, " {:>15}", name);
    }
    let _ = writeln!(s);
    for r in reports {
        let _ = write!(s, "{:<8} {:<13}", r.kind.as_str(), r.mode.as_str());
        for j in 0..5 {
            let _ = write!(s, " {:>6.3} ± {:<6.3}", r.joint_mae[j], r.joint_sd[j]);
        }
        let _ = writeln!(s);
    }
    let imp = improvement(reports);
    if !imp.is_empty() {
        let _ = writeln!(s);
        for i in imp {
            let _ = writeln!(
                s,
                "improvement {:<8} position ratio {:.3}  orientation ratio {:.3}",
                i.label(),
                i.position_ratio,
                i.orientation_ratio
            );
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmitPaths {
    pub steps: Vec<PathBuf>,
    pub aggregate: PathBuf,
    pub table: PathBuf,
}

fn write_steps(path: &Path, r: &TrackingReport) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["repeat".to_string(), "step".to_string()];
    for tag in ["des", "cmd", "phy"] {
        header.extend(JOINT_NAMES.iter().map(|n| format!("{n}_{tag}")));
    }
    header.extend(["ex", "ey", "ez", "e_pos", "e_ori"].map(String::from));
    w.write_record(&header)?;
    for rec in &r.records {
        let mut row = vec![rec.repeat.to_string(), rec.step.to_string()];
        for q in [rec.desired, rec.command, rec.physical] {
            row.extend(q.0.iter().map(|v| v.to_string()));
        }
        row.extend(rec.position_error.iter().map(|v| v.to_string()));
        row.push(rec.position_error_norm().to_string());
        row.push(rec.orientation_error.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one per-step CSV per report, an aggregate CSV with one row per
/// report and the text table. Refuses to write anything for empty input.
pub fn report_emit(reports: &[TrackingReport], dir: &Path) -> Result<EmitPaths, EvalError> {
    if reports.is_empty() || reports.iter().any(|r| r.is_empty()) {
        return Err(EvalError::EmptyReport);
    }
    std::fs::create_dir_all(dir)?;
    let mut steps = Vec::new();
    for r in reports {
        let path = dir.join(format!("{}_{}_steps.csv", r.kind.as_str(), r.mode.as_str()));
        write_steps(&path, r)?;
        steps.push(path);
    }
    let aggregate = dir.join("aggregate.csv");
    let mut w = csv::Writer::from_path(&aggregate)?;
    let mut header: Vec<String> = ["kind", "mode", "runs", "steps", "mae_x", "mae_y", "mae_z", "pos_mae", "pos_sd", "ori_mae", "ori_sd"]
        .map(String::from)
        .to_vec();
    for n in JOINT_NAMES {
        header.push(format!("{n}_mae"));
        header.push(format!("{n}_sd"));
    }
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![r.kind.as_str().to_string(), r.mode.as_str().to_string(), r.runs.to_string(), r.records.len().to_string()];
        let vals = [r.axis_mae[0], r.axis_mae[1], r.axis_mae[2], r.position_mae, r.position_sd, r.orientation_mae, r.orientation_sd];
        row.extend(vals.iter().map(|v| format!("{v:.6}")));
        for j in 0..5 {
            row.push(format!("{:.6}", r.joint_mae[j]));
            row.push(format!("{:.6}", r.joint_sd[j]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    let table = dir.join("table.txt");
    std::fs::write(&table, render_table(reports))?;
    Ok(EmitPaths { steps, aggregate, table })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r");
        assert!(matches!(report_emit(&[], &out), Err(EvalError::EmptyReport)));
        let empty = TrackingReport::from_records(TrajectoryKind::Circle, TrackMode::Calibrated, 1, vec![]);
        assert!(matches!(report_emit(&[empty], &out), Err(EvalError::EmptyReport)));
        assert!(!out.exists());
    }
}
