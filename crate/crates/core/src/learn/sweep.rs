use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::models::{ModelConfig, ModelKind};
use super::train::{train, TrainConfig};
use super::window::Direction;
use super::LearnError;
use crate::dataset::Pair;
use crate::stats::mean_sd;

pub const SWEEP_LENGTHS: [usize; 6] = [10, 50, 65, 80, 100, 120];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: ModelKind,
    pub window: usize,
    pub repeat: usize,
    pub best_val_rmse_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub kind: ModelKind,
    pub window: usize,
    pub mean_rmse_deg: f64,
    pub sd_rmse_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<SweepCell>,
}

/// Trains every `(kind, L, repeat)` combination on the same split and
/// summarizes the best validation RMSE per `(kind, L)`.
pub fn sweep_window_lengths(
    kinds: &[ModelKind],
    lengths: &[usize],
    repeats: usize,
    direction: Direction,
    train_pairs: &[Pair],
    val_pairs: &[Pair],
    hyper: &TrainConfig,
) -> Result<SweepReport, LearnError> {
    let mut report = SweepReport::default();
    for &kind in kinds {
        for &window in lengths {
            let mut scores = Vec::with_capacity(repeats);
            for repeat in 0..repeats {
                let cfg = ModelConfig::of_kind(kind, window);
                let h = TrainConfig { seed: crate::rng::sub_seed(hyper.seed, &format!("repeat/{repeat}")), ..hyper.clone() };
                let out = train(&cfg, direction, train_pairs, val_pairs, &h)?;
                let score = out.checkpoint.meta.best_val_rmse_deg;
                log::info!("sweep {} L={window} repeat {repeat}: {score:.3}°", kind.as_str());
                scores.push(score);
                report.rows.push(SweepRow { kind, window, repeat, best_val_rmse_deg: score });
            }
            let (mean, sd) = mean_sd(&scores);
            report.cells.push(SweepCell { kind, window, mean_rmse_deg: mean, sd_rmse_deg: sd });
        }
    }
    Ok(report)
}

/// Writes `kind,L,repeat,best_val_rmse_deg` per run and a summary file with
/// one `kind,L,mean,sd` row per cell.
pub fn write_sweep_csv(report: &SweepReport, runs: &Path, summary: &Path) -> Result<(), LearnError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(runs)?);
    writeln!(f, "kind,L,repeat,best_val_rmse_deg")?;
    for r in &report.rows {
        writeln!(f, "{},{},{},{}", r.kind.as_str(), r.window, r.repeat, r.best_val_rmse_deg)?;
    }
    f.flush()?;
    let mut f = std::io::BufWriter::new(std::fs::File::create(summary)?);
    writeln!(f, "kind,L,mean_rmse_deg,sd_rmse_deg")?;
    for c in &report.cells {
        writeln!(f, "{},{},{},{}", c.kind.as_str(), c.window, c.mean_rmse_deg, c.sd_rmse_deg)?;
    }
    f.flush()?;
    Ok(())
}
