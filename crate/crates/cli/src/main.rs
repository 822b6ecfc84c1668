//! `declutter` command-line interface.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for runtime
//! errors.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use declutter::clutter::{compute_clutter_map, export_clutter_map};
use declutter::experiment::{
    ablate_k, analyze_clutter_effect, calibrate_thresholds, fit_k, run_batch, sweep_gdi, write_ablation_csv,
    write_batch_outputs, write_bins_csv, write_sweep_csv, ExperimentConfig, Variant,
};
use declutter::grasp::depth_filter;
use declutter::image::{depth_to_u16, rgb_to_u8, write_pgm16, write_ppm, Grid};
use declutter::push::{distance_transform, freest_point};
use declutter::simscene::{default_catalog, render, spawn_heap, CameraModel, Scene};
use declutter::Error;

#[derive(Parser)]
#[command(name = "declutter", version, about = "Clutter-aware push-and-grasp experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment configuration (JSON); missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one variant and write episodes.jsonl, report.csv and bins.csv.
    RunBatch {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Derive the global and local clutter thresholds.
    Calibrate {
        /// Number of seeds (0..n) to sample.
        #[arg(long)]
        seeds: u64,
        /// Percentile taken on the cluttered side.
        #[arg(long, default_value_t = 50.0)]
        p_lo: f64,
        /// Percentile taken on the clear side.
        #[arg(long, default_value_t = 90.0)]
        p_hi: f64,
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Grasp success over an lct x hct grid.
    SweepGdi {
        /// Comma-separated lateral clearance thresholds, px.
        #[arg(long, value_delimiter = ',', required = true)]
        lct: Vec<f64>,
        /// Comma-separated height clearance thresholds, m.
        #[arg(long, value_delimiter = ',', required = true)]
        hct: Vec<f64>,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Grasp success per object-count bin for fixed, exact and estimated k.
    AblateK {
        #[arg(long, value_delimiter = ',', default_value = "5,10,15")]
        naive: Vec<usize>,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Per-bin clutter, MPC and GS of disperse-and-grasp versus grasp-only.
    AnalyzeClutter {
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Write RGB, depth, clutter map and distance field images of a scene.
    RenderMaps {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Write a freshly spawned heap as scene JSON.
    SpawnHeap {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        objects: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Fit the object-count model on fresh heaps and report holdout error.
    FitK {
        #[arg(long, default_value_t = 40)]
        train: u64,
        #[arg(long, default_value_t = 20)]
        holdout: u64,
        #[command(flatten)]
        cfg: ConfigArg,
    },
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn load_config(path: Option<&Path>) -> CliResult<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => ExperimentConfig::default(),
    };
    cfg.apply_seed_env()?;
    cfg.validate()?;
    Ok(cfg)
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("{s}");
    Ok(())
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::RunBatch { config, out } => {
            let cfg = load_config(Some(&config))?;
            let r = run_batch(&cfg)?;
            write_batch_outputs(&r, cfg.variant, &out)?;
            for (seed, msg) in &r.errors {
                eprintln!("episode with seed {seed} failed: {msg}");
            }
            print_json(&r.report)
        }
        Command::Calibrate { seeds, p_lo, p_hi, cfg } => {
            let c = load_config(cfg.config.as_deref())?;
            let list: Vec<u64> = (0..seeds).collect();
            print_json(&calibrate_thresholds(&c, &list, p_lo, p_hi)?)
        }
        Command::SweepGdi { lct, hct, trials, out, cfg } => {
            let c = load_config(cfg.config.as_deref())?;
            let cells = sweep_gdi(&c, &lct, &hct, trials)?;
            if let Some(dir) = out {
                create_dir(&dir)?;
                write_sweep_csv(&cells, &dir.join("sweep.csv"))?;
            }
            print_json(&cells)
        }
        Command::AblateK { naive, trials, out, cfg } => {
            let c = load_config(cfg.config.as_deref())?;
            let rows = ablate_k(&c, &naive, trials)?;
            if let Some(dir) = out {
                create_dir(&dir)?;
                write_ablation_csv(&rows, &dir.join("ablation.csv"))?;
            }
            print_json(&rows)
        }
        Command::AnalyzeClutter { trials, out, cfg } => {
            let mut c = load_config(cfg.config.as_deref())?;
            c.trials = trials;
            c.episode.record_clutter = true;
            c.variant = Variant::DisperseGrasp;
            let disperse = run_batch(&c)?;
            c.variant = Variant::GraspOptimAdaptive;
            let grasp_only = run_batch(&c)?;
            let rows = analyze_clutter_effect(&disperse.logs, &grasp_only.logs, &c.durations)?;
            if let Some(dir) = out {
                create_dir(&dir)?;
                write_bins_csv(&rows, &dir.join("clutter_bins.csv"))?;
            }
            let named: Vec<_> = rows.iter().map(|(v, b)| (v.name(), b)).collect();
            print_json(&named)
        }
        Command::RenderMaps { scene, out, cfg } => {
            let c = load_config(cfg.config.as_deref())?;
            let text = fs::read_to_string(&scene).map_err(|e| CliError::Config(format!("{}: {e}", scene.display())))?;
            let scene = Scene::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", scene.display())))?;
            create_dir(&out)?;
            print_json(&render_maps(&scene, &c, &out)?)
        }
        Command::SpawnHeap { seed, objects, out, cfg } => {
            let c = load_config(cfg.config.as_deref())?;
            let scene = spawn_heap(seed, objects, &default_catalog(), c.workspace, c.table_depth)?;
            fs::write(&out, scene.to_json()?)?;
            Ok(())
        }
        Command::FitK { train, holdout, cfg } => {
            let c = load_config(cfg.config.as_deref())?;
            let train_seeds: Vec<u64> = (0..train).collect();
            let holdout_seeds: Vec<u64> = (train..train + holdout).collect();
            print_json(&fit_k(&c, &train_seeds, &holdout_seeds)?)
        }
    }
}

#[derive(Serialize)]
struct MapsSummary {
    width: usize,
    height: usize,
    /// Stored depth value per meter.
    depth_scale: f64,
    clutter: declutter::clutter::ClutterExport,
    /// Stored distance value per pixel of distance.
    distance_scale: f64,
    freest_point: [i64; 2],
}

fn render_maps(scene: &Scene, cfg: &ExperimentConfig, out: &Path) -> CliResult<MapsSummary> {
    let cam = CameraModel::covering(&scene.workspace, cfg.episode.camera_scale);
    let (rgb, depth) = render(scene, &cam);
    let background = Grid::filled(cam.width, cam.height, scene.table_depth);
    let mask = depth_filter(&depth, &background, cfg.episode.planner.depth_delta)?;
    let map = compute_clutter_map(&rgb, &cfg.episode.fcm)?;
    let field = distance_transform(&mask);
    let free = freest_point(&field);

    let writer = |name: &str| -> CliResult<BufWriter<File>> { Ok(BufWriter::new(File::create(out.join(name))?)) };
    write_ppm(&mut writer("rgb.ppm")?, &rgb_to_u8(&rgb))?;
    write_pgm16(&mut writer("depth.pgm")?, &depth_to_u16(&depth))?;
    let clutter = export_clutter_map(&map, &mut writer("clutter.pgm")?)?;
    let (_, max) = field.min_max();
    let distance_scale = if max > 0.0 { 65535.0 / max } else { 1.0 };
    let dist = field.map(|&d| (d * distance_scale).round().clamp(0.0, 65535.0) as u16);
    write_pgm16(&mut writer("distance.pgm")?, &dist)?;
    let summary = MapsSummary {
        width: cam.width,
        height: cam.height,
        depth_scale: 10_000.0,
        clutter,
        distance_scale,
        freest_point: [free.x, free.y],
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(out.join("maps.json"), json)?;
    Ok(summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
