//! Batch experiments: variant runs, threshold calibration, k-model fitting,
//! the GDI threshold sweep, the k ablation and the clutter-effect table.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clutter::{compute_clutter_map, global_score, local_score};
use crate::error::{Error, Result};
use crate::geometry::{Rect, Vec2};
use crate::grasp::{depth_filter, estimate_area_spread, fit_k_model, mean_abs_error, plan_grasps, GdiParams, KChoice, KModel, KSample};
use crate::image::{DepthImage, Grid};
use crate::metrics::{compute_metrics, BinRow, Durations, MetricsReport};
use crate::policy::{mix_seed, run_episode, EpisodeConfig, EpisodeLog, KSource};
use crate::simscene::{default_catalog, render, spawn_heap, CameraModel, Catalog, Scene};

/// Environment variable holding a comma-separated seed list that replaces
/// the configured one.
pub const SEED_ENV: &str = "DECLUTTER_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Baseline,
    GraspOptim,
    GraspOptimAdaptive,
    DisperseGrasp,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Baseline,
        Variant::GraspOptim,
        Variant::GraspOptimAdaptive,
        Variant::DisperseGrasp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::GraspOptim => "grasp_optim",
            Variant::GraspOptimAdaptive => "grasp_optim_adaptive",
            Variant::DisperseGrasp => "disperse_grasp",
        }
    }
}

/// GDI thresholds of the unoptimized baseline.
pub fn baseline_gdi() -> GdiParams {
    GdiParams {
        lct: 4.0,
        hct: 0.005,
        ..GdiParams::default()
    }
}

/// Object-count model fitted by `fit-k` on the default catalog and camera.
pub fn default_k_model() -> KModel {
    KModel::new([1.046, 141.53, -47.31])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub variant: Variant,
    /// Minimum number of grasp attempts to collect.
    pub trials: usize,
    /// Objects per initial heap.
    pub max_objects: usize,
    pub seeds: Vec<u64>,
    pub workspace: Rect,
    pub table_depth: f64,
    /// Shared parameter bundle; the variant overrides k, GDI and policy.
    pub episode: EpisodeConfig,
    pub optimized_gdi: GdiParams,
    pub baseline_gdi: GdiParams,
    pub baseline_k: usize,
    pub k_model: KModel,
    pub durations: Durations,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            variant: Variant::DisperseGrasp,
            trials: 2000,
            max_objects: 20,
            seeds: (0..20).collect(),
            workspace: default_workspace(),
            table_depth: 0.65,
            episode: EpisodeConfig::default(),
            optimized_gdi: GdiParams::default(),
            baseline_gdi: baseline_gdi(),
            baseline_k: 10,
            k_model: default_k_model(),
            durations: Durations::default(),
        }
    }
}

pub fn default_workspace() -> Rect {
    Rect::new(Vec2::new(0.0, 0.0), Vec2::new(0.45, 0.45))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !(1..=20).contains(&self.max_objects) {
            return Err(Error::Config("max_objects must lie in 1..=20".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if !(0.50..=0.70).contains(&self.table_depth) {
            return Err(Error::Config("table_depth must lie in [0.50, 0.70]".into()));
        }
        if !(self.workspace.width() > 0.0 && self.workspace.height() > 0.0) {
            return Err(Error::Config("workspace must have positive extent".into()));
        }
        self.episode_config().validate()
    }

    /// Replaces the seed list from [`SEED_ENV`] when it is set.
    pub fn apply_seed_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seeds = parse_seed_list(&v)?;
        }
        Ok(())
    }

    /// Episode parameters with the variant's settings applied.
    pub fn episode_config(&self) -> EpisodeConfig {
        let mut e = self.episode;
        match self.variant {
            Variant::Baseline => {
                e.k = KSource::Fixed(self.baseline_k);
                e.planner.gdi = self.baseline_gdi;
                e.use_policy = false;
            }
            Variant::GraspOptim => {
                e.k = KSource::Fixed(self.baseline_k);
                e.planner.gdi = self.optimized_gdi;
                e.use_policy = false;
            }
            Variant::GraspOptimAdaptive => {
                e.k = KSource::Estimated(self.k_model);
                e.planner.gdi = self.optimized_gdi;
                e.use_policy = false;
            }
            Variant::DisperseGrasp => {
                e.k = KSource::Estimated(self.k_model);
                e.planner.gdi = self.optimized_gdi;
                e.use_policy = true;
            }
        }
        e
    }

    /// Heap seed of the `episode`-th episode: the seed list is cycled, with
    /// later passes re-mixed so every episode gets a fresh heap.
    pub fn heap_seed(&self, episode: usize) -> u64 {
        let n = self.seeds.len();
        let base = self.seeds[episode % n];
        if episode < n {
            base
        } else {
            mix_seed(base, (episode / n) as u64)
        }
    }
}

pub fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    let seeds = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u64>().map_err(|e| Error::Config(format!("bad seed {t:?}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    Ok(seeds)
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    pub report: MetricsReport,
    pub logs: Vec<EpisodeLog>,
    /// Episodes that failed, with their heap seed and error message.
    pub errors: Vec<(u64, String)>,
}

/// Runs heaps of `max_objects` objects until `trials` grasp attempts are
/// collected.
pub fn run_batch(cfg: &ExperimentConfig) -> Result<BatchResult> {
    cfg.validate()?;
    run_episodes(cfg, &cfg.episode_config(), &default_catalog())
}

pub fn write_logs_jsonl(logs: &[EpisodeLog], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for log in logs {
        log.write_jsonl(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_logs_jsonl(path: &Path) -> Result<Vec<EpisodeLog>> {
    EpisodeLog::read_jsonl(std::io::BufReader::new(File::open(path)?))
}

/// Writes `episodes.jsonl`, `report.csv` and `bins.csv` into `dir`.
pub fn write_batch_outputs(result: &BatchResult, variant: Variant, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_logs_jsonl(&result.logs, &dir.join("episodes.jsonl"))?;
    let mut w = csv::Writer::from_path(dir.join("report.csv"))?;
    w.write_record(["variant", "attempts", "gs", "mpc", "gs_wm", "mpph", "pushes", "episodes"])?;
    let r = &result.report;
    w.write_record([
        variant.name().to_string(),
        r.attempts.to_string(),
        fmt(r.gs),
        fmt(r.mpc),
        fmt(r.gs_wm),
        fmt(r.mpph),
        r.pushes.to_string(),
        result.logs.len().to_string(),
    ])?;
    w.flush()?;
    write_bins_csv(&[(variant, r.by_bin.clone())], &dir.join("bins.csv"))
}

fn fmt(v: f64) -> String {
    format!("{v:.4}")
}

/// Columns: `variant,bin_lo,bin_hi,attempts,mean_local,mpc,gs`.
pub fn write_bins_csv(rows: &[(Variant, Vec<BinRow>)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["variant", "bin_lo", "bin_hi", "attempts", "mean_local", "mpc", "gs"])?;
    for (v, bins) in rows {
        for b in bins {
            w.write_record([
                v.name().to_string(),
                b.lo.to_string(),
                b.hi.to_string(),
                b.attempts.to_string(),
                b.mean_local.map(fmt).unwrap_or_default(),
                fmt(b.mpc),
                fmt(b.gs),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Linear-interpolated percentile of unsorted data, `p` in percent.
pub fn percentile(data: &[f64], p: f64) -> f64 {
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = (p / 100.0).clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < v.len() {
        v[i] + frac * (v[i + 1] - v[i])
    } else {
        v[i]
    }
}

/// Midpoint between the `p_hi` percentile of `low` and the `p_lo`
/// percentile of `high`; `Overlap` if they are not ordered.
pub fn separating_threshold(low: &[f64], high: &[f64], p_lo: f64, p_hi: f64) -> Result<f64> {
    let a = percentile(low, p_hi);
    let b = percentile(high, p_lo);
    if !(a < b) {
        return Err(Error::Overlap { low: a, high: b });
    }
    Ok((a + b) / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub t_global: f64,
    pub t_local: f64,
    pub empty_global_hi: f64,
    pub heap_global_lo: f64,
    pub isolated_local_hi: f64,
    pub crowded_local_lo: f64,
}

fn camera_and_background(cfg: &ExperimentConfig) -> (CameraModel, DepthImage) {
    let cam = CameraModel::covering(&cfg.workspace, cfg.episode.camera_scale);
    let bg = Grid::filled(cam.width, cam.height, cfg.table_depth);
    (cam, bg)
}

/// Global score of the rendered scene and local scores of its planned poses.
fn scene_scores(scene: &Scene, cfg: &ExperimentConfig, ep: &EpisodeConfig, k: usize, seed: u64) -> Result<(f64, Vec<f64>)> {
    let (cam, bg) = camera_and_background(cfg);
    let (rgb, depth) = render(scene, &cam);
    let map = compute_clutter_map(&rgb, &ep.fcm)?;
    let locals = if scene.is_empty() {
        Vec::new()
    } else {
        plan_grasps(&depth, &bg, &KChoice::Fixed(k), &ep.planner, seed)?
            .iter()
            .map(|p| local_score(&map, p.center, ep.planner.opening_px))
            .collect::<Result<_>>()?
    };
    Ok((global_score(&map), locals))
}

/// Derives `t_global` from empty tables versus full heaps and `t_local`
/// from poses on single-object scenes versus poses in full heaps.
pub fn calibrate_thresholds(cfg: &ExperimentConfig, seeds: &[u64], p_lo: f64, p_hi: f64) -> Result<Calibration> {
    if seeds.len() < 20 {
        return Err(Error::Config("calibration needs at least 20 seeds".into()));
    }
    let mut ep = cfg.episode_config();
    ep.planner.gdi = cfg.optimized_gdi;
    let catalog = default_catalog();
    let per_seed: Vec<Result<(f64, f64, Vec<f64>, Vec<f64>)>> = seeds
        .par_iter()
        .map(|&s| {
            let empty = Scene::empty(cfg.workspace, cfg.table_depth);
            let (g_empty, _) = scene_scores(&empty, cfg, &ep, 1, s)?;
            let single = spawn_heap(s, 1, &catalog, cfg.workspace, cfg.table_depth)?;
            let (_, iso) = scene_scores(&single, cfg, &ep, 1, s)?;
            let heap = spawn_heap(s, cfg.max_objects, &catalog, cfg.workspace, cfg.table_depth)?;
            let (g_heap, crowd) = scene_scores(&heap, cfg, &ep, cfg.max_objects, s)?;
            Ok((g_empty, g_heap, iso, crowd))
        })
        .collect();
    let (mut ge, mut gh, mut iso, mut crowd) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for r in per_seed {
        let (a, b, c, d) = r?;
        ge.push(a);
        gh.push(b);
        iso.extend(c);
        crowd.extend(d);
    }
    let t_global = separating_threshold(&ge, &gh, p_lo, p_hi)?;
    let t_local = separating_threshold(&iso, &crowd, p_lo, p_hi)?;
    Ok(Calibration {
        t_global,
        t_local,
        empty_global_hi: percentile(&ge, p_hi),
        heap_global_lo: percentile(&gh, p_lo),
        isolated_local_hi: percentile(&iso, p_hi),
        crowded_local_lo: percentile(&crowd, p_lo),
    })
}

/// Area spread and global clutter of fresh heaps labeled with their true
/// object count, one sample per (seed, n).
pub fn k_samples(cfg: &ExperimentConfig, seeds: &[u64], counts: &[usize]) -> Result<Vec<KSample>> {
    let (cam, bg) = camera_and_background(cfg);
    let catalog = default_catalog();
    let jobs: Vec<(u64, usize)> = seeds.iter().flat_map(|&s| counts.iter().map(move |&n| (s, n))).collect();
    jobs.par_iter()
        .map(|&(s, n)| {
            let scene = spawn_heap(mix_seed(s, n as u64), n, &catalog, cfg.workspace, cfg.table_depth)?;
            let (rgb, depth) = render(&scene, &cam);
            let mask = depth_filter(&depth, &bg, cfg.episode.planner.depth_delta)?;
            let map = compute_clutter_map(&rgb, &cfg.episode.fcm)?;
            Ok(KSample {
                area: estimate_area_spread(&mask),
                g_cs: global_score(&map),
                k: n as f64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KFit {
    pub model: KModel,
    pub train_mae: f64,
    pub holdout_mae: f64,
    pub train_samples: usize,
    pub holdout_samples: usize,
}

/// Fits the k-model on `train_seeds` and reports the error on `holdout_seeds`.
pub fn fit_k(cfg: &ExperimentConfig, train_seeds: &[u64], holdout_seeds: &[u64]) -> Result<KFit> {
    let counts: Vec<usize> = (1..=cfg.max_objects).collect();
    let train = k_samples(cfg, train_seeds, &counts)?;
    let hold = k_samples(cfg, holdout_seeds, &counts)?;
    let model = fit_k_model(&train)?;
    Ok(KFit {
        model,
        train_mae: mean_abs_error(&model, &train),
        holdout_mae: mean_abs_error(&model, &hold),
        train_samples: train.len(),
        holdout_samples: hold.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub lct: f64,
    pub hct: f64,
    pub gs: f64,
    pub attempts: usize,
}

/// Grasp-only success over the `lct × hct` grid, `trials` attempts per cell.
pub fn sweep_gdi(cfg: &ExperimentConfig, lct: &[f64], hct: &[f64], trials: usize) -> Result<Vec<SweepCell>> {
    if lct.is_empty() || hct.is_empty() {
        return Err(Error::Config("sweep grids must be non-empty".into()));
    }
    let mut cells = Vec::with_capacity(lct.len() * hct.len());
    for &l in lct {
        for &h in hct {
            let mut c = cfg.clone();
            c.variant = Variant::GraspOptim;
            c.trials = trials;
            c.optimized_gdi.lct = l;
            c.optimized_gdi.hct = h;
            c.episode.record_clutter = false;
            let r = run_batch(&c)?;
            cells.push(SweepCell {
                lct: l,
                hct: h,
                gs: r.report.gs,
                attempts: r.report.attempts,
            });
        }
    }
    Ok(cells)
}

/// Columns: `lct,hct,gs,attempts`.
pub fn write_sweep_csv(cells: &[SweepCell], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["lct", "hct", "gs", "attempts"])?;
    for c in cells {
        w.write_record([c.lct.to_string(), c.hct.to_string(), fmt(c.gs), c.attempts.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KVariant {
    Naive(usize),
    Exact,
    Estimate,
}

impl KVariant {
    pub fn label(self) -> String {
        match self {
            KVariant::Naive(k) => format!("naive_k{k}"),
            KVariant::Exact => "exact".into(),
            KVariant::Estimate => "estimate".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: KVariant,
    pub lo: usize,
    pub hi: usize,
    pub attempts: usize,
    pub gs: f64,
}

/// Grasp-only runs with the optimized GDI and different cluster counts.
pub fn ablate_k(cfg: &ExperimentConfig, naive: &[usize], trials: usize) -> Result<Vec<AblationRow>> {
    let variants: Vec<KVariant> = naive
        .iter()
        .map(|&k| KVariant::Naive(k))
        .chain([KVariant::Exact, KVariant::Estimate])
        .collect();
    let mut rows = Vec::new();
    for v in variants {
        let mut c = cfg.clone();
        c.variant = Variant::GraspOptim;
        c.trials = trials;
        c.episode.record_clutter = false;
        let mut ep = c.episode_config();
        ep.k = match v {
            KVariant::Naive(k) => KSource::Fixed(k),
            KVariant::Exact => KSource::Exact,
            KVariant::Estimate => KSource::Estimated(c.k_model),
        };
        let r = run_batch_with(&c, ep)?;
        rows.extend(r.report.by_bin.iter().map(|b| AblationRow {
            variant: v,
            lo: b.lo,
            hi: b.hi,
            attempts: b.attempts,
            gs: b.gs,
        }));
    }
    Ok(rows)
}

/// Like [`run_batch`] but with an explicit episode configuration; the
/// variant mapping is bypassed.
pub fn run_batch_with(cfg: &ExperimentConfig, ep: EpisodeConfig) -> Result<BatchResult> {
    cfg.validate()?;
    ep.validate()?;
    run_episodes(cfg, &ep, &default_catalog())
}

/// Episodes are run in parallel in fixed-size rounds; the result is the
/// shortest in-order prefix of episodes whose grasp attempts reach
/// `trials`, so it does not depend on the thread count.
fn run_episodes(cfg: &ExperimentConfig, ep: &EpisodeConfig, catalog: &Catalog) -> Result<BatchResult> {
    let round = 16;
    let mut logs = Vec::new();
    let mut errors = Vec::new();
    let mut attempts = 0usize;
    let mut next = 0usize;
    'outer: loop {
        let results: Vec<(u64, Result<EpisodeLog>)> = (next..next + round)
            .into_par_iter()
            .map(|i| {
                let seed = cfg.heap_seed(i);
                let r = spawn_heap(seed, cfg.max_objects, catalog, cfg.workspace, cfg.table_depth)
                    .and_then(|scene| run_episode(&scene, ep, seed));
                (seed, r)
            })
            .collect();
        next += round;
        for (seed, r) in results {
            match r {
                Ok(log) => {
                    attempts += log.grasp_records().count();
                    logs.push(log);
                    if attempts >= cfg.trials {
                        break 'outer;
                    }
                }
                Err(e) => errors.push((seed, e.to_string())),
            }
        }
        if errors.len() > 100 + logs.len() {
            return Err(Error::Config(format!("episodes keep failing: {}", errors[0].1)));
        }
    }
    let report = compute_metrics(&logs, &cfg.durations)?;
    Ok(BatchResult { report, logs, errors })
}

/// Columns: `variant,bin_lo,bin_hi,attempts,gs`.
pub fn write_ablation_csv(rows: &[AblationRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["variant", "bin_lo", "bin_hi", "attempts", "gs"])?;
    for r in rows {
        w.write_record([r.variant.label(), r.lo.to_string(), r.hi.to_string(), r.attempts.to_string(), fmt(r.gs)])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-bin clutter, MPC and GS of a disperse run and a grasp-only run.
pub fn analyze_clutter_effect(
    disperse: &[EpisodeLog],
    grasp_only: &[EpisodeLog],
    durations: &Durations,
) -> Result<Vec<(Variant, Vec<BinRow>)>> {
    if disperse.is_empty() || grasp_only.is_empty() {
        return Err(Error::Config("both log sets must be non-empty".into()));
    }
    Ok(vec![
        (Variant::DisperseGrasp, compute_metrics(disperse, durations)?.by_bin),
        (Variant::GraspOptimAdaptive, compute_metrics(grasp_only, durations)?.by_bin),
    ])
}
