//! `tendon-hyst`: collect hysteresis data from the synthetic plant, train the
//! forward and inverse models, and evaluate learned compensation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hyst_core::compensate::{compensate, compensate_with_history, HistoryMode};
use hyst_core::config::RunConfig;
use hyst_core::dataset::{self, meta_path, SplitTag};
use hyst_core::eval::{render_table, report_emit, TrackMode, TrajectoryKind};
use hyst_core::kinematics::{JointConfig, JOINT_NAMES};
use hyst_core::learn::{write_sweep_csv, Direction, ModelKind, SequenceWindow, TrainOutcome};
use hyst_core::plant::HysteresisPlantParams;
use hyst_core::run::{self, Layout, RunError};

#[derive(Parser, Debug)]
#[command(name = "tendon-hyst", version, about = "Learned hysteresis compensation for a tendon-driven continuum manipulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; every section is optional
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// global seed (overrides the config file and TENDON_HYST_SEED)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// directory for every artifact
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// plant preset replacing the configured plant
    #[arg(long, global = true, value_enum)]
    plant: Option<PlantPreset>,
    /// log progress to stderr (repeat for per-epoch detail)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PlantPreset {
    Shipping,
    Identity,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Drive the plant through random waypoints and write the dataset
    Collect(CollectArgs),
    /// Train the forward and inverse models
    Train(TrainArgs),
    /// Window-length study of the forward model
    Sweep(SweepArgs),
    /// Track evaluation trajectories with and without compensation
    Track(TrackArgs),
    /// Compensate a single desired configuration (debugging aid)
    CompensateOne(CompensateOneArgs),
}

#[derive(Args, Debug)]
struct CollectArgs {
    /// number of random waypoints
    #[arg(long)]
    waypoints: Option<usize>,
    /// label physical angles through the marker perception pipeline (default on)
    #[arg(long, value_name = "on|off", value_parser = clap::builder::BoolishValueParser::new(), hide_possible_values = true)]
    perception: Option<bool>,
    /// dataset CSV path (default: OUT_DIR/dataset.csv)
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct TrainingFlags {
    /// dataset CSV (default: OUT_DIR/dataset.csv)
    #[arg(long, value_name = "FILE")]
    dataset: Option<PathBuf>,
    /// training epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// epochs without improvement before stopping
    #[arg(long)]
    patience: Option<usize>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    flags: TrainingFlags,
    /// model architecture
    #[arg(long, value_parser = parse_model_kind)]
    arch: Option<ModelKind>,
    /// window length L, shared by training and compensation
    #[arg(long = "L", value_name = "L")]
    window: Option<usize>,
    /// also run the window-length study
    #[arg(long)]
    sweep: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    flags: TrainingFlags,
    /// trainings per (architecture, L) cell
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct CompensatorFlags {
    /// maximum refinement iterations
    #[arg(long = "M", value_name = "M")]
    m: Option<usize>,
    /// refinement step per degree of predicted error
    #[arg(long)]
    alpha: Option<f64>,
    /// per-joint error threshold (deg)
    #[arg(long)]
    thr: Option<f64>,
    /// window length L, shared by training and compensation
    #[arg(long = "L", value_name = "L")]
    window: Option<usize>,
    /// forward model checkpoint (default: OUT_DIR/model_forward.json)
    #[arg(long, value_name = "FILE")]
    model_forward: Option<PathBuf>,
    /// inverse model checkpoint (default: OUT_DIR/model_inverse.json)
    #[arg(long, value_name = "FILE")]
    model_inverse: Option<PathBuf>,
    /// forward desired angles untouched
    #[arg(long)]
    bypass: bool,
}

#[derive(Args, Debug)]
struct TrackArgs {
    #[command(flatten)]
    comp: CompensatorFlags,
    /// trajectory kinds, comma separated (random, circle, zigzag)
    #[arg(long, value_delimiter = ',', value_parser = parse_kind)]
    kind: Vec<TrajectoryKind>,
    /// controller mode; both modes when omitted
    #[arg(long, value_parser = parse_mode)]
    mode: Option<TrackMode>,
    /// runs of each trajectory
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Args, Debug)]
struct CompensateOneArgs {
    #[command(flatten)]
    comp: CompensatorFlags,
    /// desired configuration q1,q2,q3,q4,q5 (deg)
    #[arg(long, value_parser = parse_joints, allow_hyphen_values = true)]
    q: JointConfig,
    /// CSV of earlier desired configurations, one q1..q5 row each, oldest first
    #[arg(long, value_name = "FILE")]
    history: Option<PathBuf>,
}

fn parse_model_kind(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

fn parse_kind(s: &str) -> Result<TrajectoryKind, String> {
    s.parse()
}

fn parse_mode(s: &str) -> Result<TrackMode, String> {
    s.parse()
}

fn parse_joints(s: &str) -> Result<JointConfig, String> {
    let vals: Vec<f64> = s.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"))).collect::<Result<_, _>>()?;
    let arr: [f64; 5] = vals.try_into().map_err(|v: Vec<f64>| format!("expected 5 angles, got {}", v.len()))?;
    Ok(JointConfig(arr))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_env("TENDON_HYST_LOG").init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig, RunError> {
    let mut cfg = match &common.config {
        Some(path) => {
            if !path.exists() {
                return Err(RunError::Missing { what: "config", path: path.clone() });
            }
            RunConfig::load(path)?
        }
        None => RunConfig::default(),
    };
    cfg.apply_env()?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &common.out_dir {
        cfg.out_dir = dir.clone();
    }
    match common.plant {
        Some(PlantPreset::Identity) => cfg.plant = HysteresisPlantParams::identity(),
        Some(PlantPreset::Shipping) => cfg.plant = HysteresisPlantParams::shipping(),
        None => {}
    }
    Ok(cfg)
}

fn set_window(cfg: &mut RunConfig, window: Option<usize>) {
    if let Some(l) = window {
        cfg.training.window = l;
        cfg.compensator.window = l;
    }
}

fn apply_training_flags(cfg: &mut RunConfig, flags: &TrainingFlags) {
    if let Some(e) = flags.epochs {
        cfg.training.epochs = e;
    }
    if let Some(p) = flags.patience {
        cfg.training.patience = p;
    }
}

fn apply_compensator_flags(cfg: &mut RunConfig, flags: &CompensatorFlags) {
    if let Some(m) = flags.m {
        cfg.compensator.m = m;
    }
    if let Some(a) = flags.alpha {
        cfg.compensator.alpha = a;
    }
    if let Some(t) = flags.thr {
        cfg.compensator.thr = t;
    }
    set_window(cfg, flags.window);
}

fn execute(cli: Cli) -> Result<(), RunError> {
    let mut cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Collect(args) => {
            if let Some(n) = args.waypoints {
                cfg.dataset.waypoints = n;
            }
            if let Some(on) = args.perception {
                cfg.dataset.perception = on;
            }
            cfg.validate()?;
            cmd_collect(&cfg, args.output)
        }
        Command::Train(args) => {
            apply_training_flags(&mut cfg, &args.flags);
            if let Some(kind) = args.arch {
                cfg.training.kind = kind;
            }
            set_window(&mut cfg, args.window);
            cfg.validate()?;
            cmd_train(&cfg, args.flags.dataset, args.sweep)
        }
        Command::Sweep(args) => {
            apply_training_flags(&mut cfg, &args.flags);
            if let Some(r) = args.repeats {
                cfg.training.sweep_repeats = r;
            }
            cfg.validate()?;
            cmd_sweep(&cfg, args.flags.dataset)
        }
        Command::Track(args) => {
            apply_compensator_flags(&mut cfg, &args.comp);
            if !args.kind.is_empty() {
                cfg.eval.kinds = args.kind.clone();
            }
            if let Some(r) = args.repeats {
                cfg.eval.repeats = r;
            }
            cfg.validate()?;
            cmd_track(&cfg, &args)
        }
        Command::CompensateOne(args) => {
            apply_compensator_flags(&mut cfg, &args.comp);
            cfg.validate()?;
            cmd_compensate_one(&cfg, &args)
        }
    }
}

fn cmd_collect(cfg: &RunConfig, output: Option<PathBuf>) -> Result<(), RunError> {
    let start = Instant::now();
    let path = output.unwrap_or_else(|| Layout::new(&cfg.out_dir).dataset());
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let data = run::collect_dataset(cfg)?;
    let sha = dataset::write_dataset(&path, &data)?;
    let train = dataset::train_count(data.len(), cfg.dataset.train_frac);
    let dropped = data.pairs.iter().filter(|p| !p.valid).count();
    println!(
        "collected {} pairs from {} waypoints at {}° steps (train {} / val {}), perception {}, {dropped} dropped",
        data.len(),
        data.meta.waypoints,
        data.meta.step_deg,
        train,
        data.len() - train,
        if data.meta.perception { "on" } else { "off" },
    );
    let (mae, sd) = data.error_stats();
    println!("{:<6} {:>9} {:>9}", "joint", "MAE (°)", "SD (°)");
    for j in 0..5 {
        println!("{:<6} {:>9.2} {:>9.2}", JOINT_NAMES[j], mae[j], sd[j]);
    }
    println!("sha256 {sha}");
    println!("wrote {} and {} in {:.1} s", path.display(), meta_path(&path).display(), start.elapsed().as_secs_f64());
    Ok(())
}

fn dataset_path(cfg: &RunConfig, explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| Layout::new(&cfg.out_dir).dataset())
}

fn report_outcome(label: &str, out: &TrainOutcome, path: &Path) {
    let m = &out.checkpoint.meta;
    println!(
        "{label:<8} {} L={} params {}: best val RMSE {:.3}° at epoch {} of {} -> {}",
        out.checkpoint.arch.as_str(),
        out.checkpoint.config.window,
        out.checkpoint.n_weights,
        m.best_val_rmse_deg,
        m.best_epoch,
        m.epochs_run,
        path.display()
    );
}

fn cmd_train(cfg: &RunConfig, dataset: Option<PathBuf>, sweep: bool) -> Result<(), RunError> {
    let start = Instant::now();
    let data = run::load_dataset(&dataset_path(cfg, dataset.clone()))?;
    if data.meta.split != SplitTag::Full {
        log::warn!("dataset is a {:?} split; splitting it again", data.meta.split);
    }
    let layout = Layout::new(&cfg.out_dir);
    std::fs::create_dir_all(&layout.root)?;
    let (forward, inverse) = run::train_pair(cfg, &data)?;
    for (label, out, dir) in [("forward", &forward, Direction::Forward), ("inverse", &inverse, Direction::Inverse)] {
        let path = layout.checkpoint(dir);
        out.checkpoint.save(&path)?;
        report_outcome(label, out, &path);
    }
    if sweep {
        cmd_sweep(cfg, dataset)?;
    }
    println!("trained in {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, dataset: Option<PathBuf>) -> Result<(), RunError> {
    let data = run::load_dataset(&dataset_path(cfg, dataset))?;
    let layout = Layout::new(&cfg.out_dir);
    std::fs::create_dir_all(&layout.root)?;
    let report = run::sweep(cfg, &data)?;
    write_sweep_csv(&report, &layout.sweep_runs(), &layout.sweep_summary())?;
    println!("{:<5} {:>4} {:>10} {:>8}", "arch", "L", "mean (°)", "SD (°)");
    for c in &report.cells {
        println!("{:<5} {:>4} {:>10.3} {:>8.3}", c.kind.as_str(), c.window, c.mean_rmse_deg, c.sd_rmse_deg);
    }
    println!("wrote {} and {}", layout.sweep_runs().display(), layout.sweep_summary().display());
    Ok(())
}

fn load_models(cfg: &RunConfig, flags: &CompensatorFlags) -> Result<(hyst_core::learn::Model, hyst_core::learn::Model), RunError> {
    let layout = Layout::new(&cfg.out_dir);
    let fwd = flags.model_forward.clone().unwrap_or_else(|| layout.checkpoint(Direction::Forward));
    let inv = flags.model_inverse.clone().unwrap_or_else(|| layout.checkpoint(Direction::Inverse));
    let forward = run::load_model(&fwd, Direction::Forward)?;
    let inverse = run::load_model(&inv, Direction::Inverse)?;
    for (path, model) in [(&fwd, &forward), (&inv, &inverse)] {
        if model.config.window != cfg.compensator.window {
            return Err(RunError::Config(hyst_core::config::ConfigError::Invalid(format!(
                "{} was trained with L = {}, compensator uses L = {}",
                path.display(),
                model.config.window,
                cfg.compensator.window
            ))));
        }
    }
    Ok((forward, inverse))
}

fn cmd_track(cfg: &RunConfig, args: &TrackArgs) -> Result<(), RunError> {
    let start = Instant::now();
    let modes: Vec<TrackMode> = match (args.mode, args.comp.bypass) {
        (Some(TrackMode::Calibrated), true) => {
            return Err(RunError::Config(hyst_core::config::ConfigError::Invalid(
                "--bypass contradicts --mode calibrated".into(),
            )))
        }
        (_, true) | (Some(TrackMode::Uncalibrated), false) => vec![TrackMode::Uncalibrated],
        (Some(TrackMode::Calibrated), false) => vec![TrackMode::Calibrated],
        (None, false) => vec![TrackMode::Uncalibrated, TrackMode::Calibrated],
    };
    let models = if modes.contains(&TrackMode::Calibrated) { Some(load_models(cfg, &args.comp)?) } else { None };
    let trajectories = run::trajectories(cfg, &cfg.eval.kinds)?;
    let reports = run::track_modes(cfg, &trajectories, &modes, models.as_ref(), cfg.eval.repeats)?;
    let dir = Layout::new(&cfg.out_dir).track_dir();
    let paths = report_emit(&reports, &dir)?;
    // the table ends with one improvement line per kind plus the combined line
    print!("{}", render_table(&reports));
    println!("wrote {} and {}", paths.aggregate.display(), paths.table.display());
    println!("tracked in {:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn read_history(path: &Path) -> Result<Vec<JointConfig>, RunError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
        match vals {
            Ok(v) if v.len() == 5 => rows.push(JointConfig([v[0], v[1], v[2], v[3], v[4]])),
            // a non-numeric first line is a header
            Err(_) if rows.is_empty() && i == 0 => {}
            _ => {
                return Err(RunError::Dataset(dataset::DatasetError::Format(format!(
                    "{} line {}: expected five comma-separated angles",
                    path.display(),
                    i + 1
                ))))
            }
        }
    }
    Ok(rows)
}

fn fmt_q(q: &JointConfig) -> String {
    q.0.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", ")
}

fn cmd_compensate_one(cfg: &RunConfig, args: &CompensateOneArgs) -> Result<(), RunError> {
    let desired = args.q;
    if args.comp.bypass {
        println!("calibrated [{}] (bypass)", fmt_q(&desired));
        return Ok(());
    }
    let (forward, inverse) = load_models(cfg, &args.comp)?;
    let history = match &args.history {
        Some(p) => read_history(p)?,
        None => Vec::new(),
    };
    let window = SequenceWindow::from_history(&history, desired, cfg.compensator.window);
    let comp = match cfg.compensator.history {
        HistoryMode::Desired => compensate(&window, &forward, &inverse, &cfg.compensator),
        // a single call has no issued commands, so the desired rows stand in
        HistoryMode::Calibrated => compensate_with_history(&window, &window, &forward, &inverse, &cfg.compensator),
    };
    println!("desired    [{}]", fmt_q(&desired));
    println!("calibrated [{}]", fmt_q(&comp.q));
    println!("residual   [{}]", fmt_q(&comp.residual));
    println!("updates {} converged {}", comp.updates, comp.converged);
    Ok(())
}
