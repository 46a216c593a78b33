//! Frozen report artifacts from a seeded identity-plant run. Regenerate with
//! `UPDATE_GOLDEN=1 cargo test -p hyst-core --test eval_golden` after an
//! intentional format or trajectory change.

use std::path::{Path, PathBuf};

use hyst_core::compensate::{CalibratedController, FnModel};
use hyst_core::config::RunConfig;
use hyst_core::eval::{report_emit, track, TrackMode, TrajectoryKind, TrajectoryParams};
use hyst_core::learn::SequenceWindow;
use hyst_core::plant::HysteresisPlantParams;
use hyst_core::run;

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn identity_controller(window: usize) -> CalibratedController {
    let ident = || Box::new(FnModel { f: |w: &SequenceWindow| w.last(), window });
    CalibratedController::new(ident(), ident(), Default::default())
}

#[test]
fn identity_plant_reports_match_golden_files() {
    let mut cfg = RunConfig { seed: 2024, plant: HysteresisPlantParams::identity(), ..RunConfig::default() };
    cfg.dataset.waypoints = 20;
    cfg.eval.trajectory = TrajectoryParams { samples: 24, ..cfg.eval.trajectory };
    cfg.compensator.window = 8;
    let trajectories = run::trajectories(&cfg, &TrajectoryKind::ALL).unwrap();
    let mut reports = Vec::new();
    for t in &trajectories {
        for mode in [TrackMode::Uncalibrated, TrackMode::Calibrated] {
            let mut ctl = match mode {
                TrackMode::Uncalibrated => CalibratedController::uncalibrated(8),
                TrackMode::Calibrated => identity_controller(8),
            };
            reports.push(track(t, &mut ctl, &cfg.plant_params(), 2, &cfg.manipulator, &cfg.cables).unwrap());
        }
    }
    assert!(reports.iter().all(|r| r.position_mae < 0.01));

    let out = tempfile::tempdir().unwrap();
    let paths = report_emit(&reports, out.path()).unwrap();
    let mut files: Vec<PathBuf> = paths.steps.clone();
    files.push(paths.aggregate.clone());
    files.push(paths.table.clone());
    assert_eq!(files.len(), 8);

    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for file in files {
        let name = file.file_name().unwrap();
        let golden = golden_dir().join(name);
        let got = std::fs::read_to_string(&file).unwrap();
        if update {
            std::fs::write(&golden, &got).unwrap();
            continue;
        }
        let want = std::fs::read_to_string(&golden).unwrap_or_else(|e| panic!("{}: {e}", golden.display()));
        assert!(got == want, "{} differs from its golden copy", name.to_string_lossy());
    }
}
