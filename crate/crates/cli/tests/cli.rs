use std::path::Path;
use std::process::{Command, Output};

use hyst_core::config::RunConfig;
use hyst_core::dataset::{interpolate, read_dataset};
use hyst_core::run::training_waypoints;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tendon-hyst"));
    c.env_remove("TENDON_HYST_SEED");
    c
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().args(args).arg("--out-dir").arg(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> String {
    assert!(o.status.success(), "exit {:?}\nstdout:\n{}\nstderr:\n{}", o.status, stdout(&o), stderr(&o));
    stdout(&o)
}

fn sha_line(out: &str) -> String {
    out.lines().find(|l| l.starts_with("sha256 ")).expect("hash printed").to_string()
}

/// Writes a small run config and returns its path.
fn small_config(dir: &Path) -> String {
    let path = dir.join("run.toml");
    let text = "[dataset]\nwaypoints = 30\n[training]\nwindow = 10\nepochs = 40\npatience = 40\n[compensator]\nwindow = 10\n[eval]\nrepeats = 1\n";
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn collect_writes_dataset_sized_by_interpolation() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(run_in(dir.path(), &["collect"]));
    let csv = dir.path().join("dataset.csv");
    assert!(csv.exists() && dir.path().join("dataset.csv.meta.json").exists());
    let cfg = RunConfig::default();
    let expected = interpolate(&training_waypoints(&cfg), cfg.dataset.step_deg).unwrap().len();
    assert_eq!(read_dataset(&csv).unwrap().len(), expected);
    assert!(out.contains(&format!("collected {expected} pairs")), "{out}");
}

#[test]
fn identity_plant_summary_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(run_in(dir.path(), &["collect", "--plant", "identity", "--waypoints", "10"]));
    let rows: Vec<&str> = out.lines().filter(|l| l.starts_with('q')).collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        let cols: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(cols[1..], ["0.00", "0.00"], "{row}");
    }
}

#[test]
fn seed_controls_the_dataset_hash() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let a = sha_line(&ok(run_in(dirs[0].path(), &["collect", "--waypoints", "12", "--seed", "5"])));
    let b = sha_line(&ok(run_in(dirs[1].path(), &["collect", "--waypoints", "12", "--seed", "5"])));
    let c = sha_line(&ok(run_in(dirs[2].path(), &["collect", "--waypoints", "12", "--seed", "6"])));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn seed_environment_variable_is_honoured_and_flag_wins() {
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let collect = |dir: &Path, env: Option<&str>, extra: &[&str]| {
        let mut c = bin();
        if let Some(v) = env {
            c.env("TENDON_HYST_SEED", v);
        }
        sha_line(&ok(c.args(["collect", "--waypoints", "12"]).args(extra).arg("--out-dir").arg(dir).output().unwrap()))
    };
    let env9 = collect(dirs[0].path(), Some("9"), &[]);
    let flag9 = collect(dirs[1].path(), Some("3"), &["--seed", "9"]);
    let default = collect(dirs[2].path(), None, &[]);
    assert_eq!(env9, flag9);
    assert_ne!(env9, default);

    let bad = bin().env("TENDON_HYST_SEED", "nope").args(["collect", "--waypoints", "3"]).output().unwrap();
    assert!(!bad.status.success());
    assert!(stderr(&bad).contains("TENDON_HYST_SEED"));
}

#[test]
fn identity_training_reaches_low_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    ok(run_in(dir.path(), &["collect", "--plant", "identity", "--config", &cfg, "--waypoints", "60"]));
    let out = ok(run_in(dir.path(), &["train", "--config", &cfg, "--epochs", "150", "--patience", "150"]));
    let rmse: Vec<f64> = out
        .lines()
        .filter_map(|l| l.split("best val RMSE ").nth(1))
        .map(|s| s.split('°').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(rmse.len(), 2, "{out}");
    assert!(rmse.iter().all(|r| *r < 0.5), "{out}");
    assert!(dir.path().join("model_forward.json").exists() && dir.path().join("model_inverse.json").exists());
}

#[test]
fn sweep_report_has_one_summary_row_per_kind_and_length() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    ok(run_in(dir.path(), &["collect", "--config", &cfg, "--waypoints", "12"]));
    let sweep_cfg = dir.path().join("sweep.toml");
    std::fs::write(&sweep_cfg, "[dataset]\nwaypoints = 12\n[training]\nepochs = 1\nsweep_repeats = 2\n").unwrap();
    ok(run_in(dir.path(), &["train", "--sweep", "--config", sweep_cfg.to_str().unwrap()]));
    let summary = std::fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 6, "{summary}");
    let runs = std::fs::read_to_string(dir.path().join("sweep_runs.csv")).unwrap();
    assert_eq!(runs.lines().next().unwrap(), "kind,L,repeat,best_val_rmse_deg");
    assert_eq!(runs.lines().count(), 1 + 2 * 6 * 2);
}

#[test]
fn missing_inputs_fail_with_a_clear_message() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["train"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("dataset not found"), "{}", stderr(&o));

    let o = run_in(dir.path(), &["track", "--mode", "calibrated"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("checkpoint not found"), "{}", stderr(&o));

    let o = run_in(dir.path(), &["collect", "--config", "/nonexistent/run.toml"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("/nonexistent/run.toml"));
}

#[test]
fn uncalibrated_tracking_needs_no_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(run_in(dir.path(), &["track", "--mode", "uncalibrated", "--kind", "circle", "--repeats", "1"]));
    assert!(out.contains("circle"), "{out}");
    assert!(!out.contains("improvement"), "{out}");
    let agg = std::fs::read_to_string(dir.path().join("track/aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 2);
}

#[test]
fn full_small_run_prints_one_improvement_line_per_kind() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    ok(run_in(dir.path(), &["collect", "--config", &cfg]));
    ok(run_in(dir.path(), &["train", "--config", &cfg]));
    let out = ok(run_in(dir.path(), &["track", "--config", &cfg]));
    for kind in ["random", "circle", "zigzag", "combined"] {
        let n = out.lines().filter(|l| l.starts_with(&format!("improvement {kind} "))).count();
        assert_eq!(n, 1, "{kind}:\n{out}");
    }
    let agg = std::fs::read_to_string(dir.path().join("track/aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 3 * 2);

    let one = ok(run_in(dir.path(), &["compensate-one", "--config", &cfg, "--q", "5,-3,2,0,10"]));
    assert!(one.contains("calibrated [") && one.contains("converged"), "{one}");
}

#[test]
fn window_mismatch_between_checkpoint_and_compensator_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    ok(run_in(dir.path(), &["collect", "--config", &cfg, "--waypoints", "12"]));
    ok(run_in(dir.path(), &["train", "--config", &cfg, "--epochs", "1"]));
    let o = run_in(dir.path(), &["compensate-one", "--config", &cfg, "--L", "12", "--q", "0,0,0,0,0"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("L = 10"), "{}", stderr(&o));
}

#[test]
fn bypass_returns_the_desired_configuration() {
    let out = ok(bin().args(["compensate-one", "--bypass", "--q", "1.5,-2,3,-4,5"]).output().unwrap());
    assert!(out.contains("[1.500, -2.000, 3.000, -4.000, 5.000] (bypass)"), "{out}");
}

#[test]
fn unknown_flags_are_errors_and_help_lists_flags() {
    let o = bin().args(["collect", "--no-such-flag"]).output().unwrap();
    assert!(!o.status.success());
    let help = ok(bin().args(["track", "--help"]).output().unwrap());
    for flag in ["--config", "--seed", "--out-dir", "--plant", "--kind", "--mode", "--repeats", "--M", "--alpha", "--thr", "--L", "--model-forward", "--model-inverse", "--bypass"] {
        assert!(help.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn train_and_collect_are_byte_identical_across_runs() {
    let dirs: Vec<_> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    let mut contents = Vec::new();
    for d in &dirs {
        let cfg = small_config(d.path());
        ok(run_in(d.path(), &["collect", "--config", &cfg, "--waypoints", "12"]));
        ok(run_in(d.path(), &["train", "--config", &cfg, "--epochs", "2"]));
        let read = |f: &str| std::fs::read(d.path().join(f)).unwrap();
        contents.push([read("dataset.csv"), read("dataset.csv.meta.json"), read("model_forward.json"), read("model_inverse.json")]);
    }
    assert!(contents[0] == contents[1]);
}
