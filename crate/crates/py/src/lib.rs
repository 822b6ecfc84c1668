//! Python bindings. Structured values cross the boundary as JSON strings
//! using the same schemas as the CLI and the episode logs.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dc::clutter::{compute_clutter_map, global_score, local_score};
use dc::experiment::{run_batch as core_run_batch, ExperimentConfig};
use dc::grasp::{plan_grasps, GraspPose, KChoice};
use dc::image::{Grid, Pixel};
use dc::policy::{decide_action as core_decide, DecisionKind, PolicyThresholds};
use dc::simscene::{default_catalog, render, CameraModel, Scene};

fn to_py(e: dc::Error) -> PyErr {
    match e {
        dc::Error::Config(_) | dc::Error::Json(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn parse_config(config_json: Option<&str>) -> PyResult<ExperimentConfig> {
    let cfg: ExperimentConfig = match config_json {
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string()))?,
        None => ExperimentConfig::default(),
    };
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

/// Scene JSON of a fresh heap of `n` objects on the default workspace.
#[pyfunction]
#[pyo3(signature = (seed, n=20))]
pub fn spawn_heap(seed: u64, n: usize) -> PyResult<String> {
    let cfg = ExperimentConfig::default();
    let scene = dc::simscene::spawn_heap(seed, n, &default_catalog(), cfg.workspace, cfg.table_depth).map_err(to_py)?;
    scene.to_json().map_err(to_py)
}

/// Global clutter score and the top grasp poses with their local scores,
/// as JSON `{"global": g, "poses": [...]}`.
#[pyfunction]
#[pyo3(signature = (scene_json, k=10, seed=0))]
pub fn clutter_scores(scene_json: &str, k: usize, seed: u64) -> PyResult<String> {
    let scene = Scene::from_json(scene_json).map_err(to_py)?;
    let cfg = ExperimentConfig::default();
    let ep = cfg.episode_config();
    let cam = CameraModel::covering(&scene.workspace, ep.camera_scale);
    let (rgb, depth) = render(&scene, &cam);
    let map = compute_clutter_map(&rgb, &ep.fcm).map_err(to_py)?;
    let background = Grid::filled(cam.width, cam.height, scene.table_depth);
    let mut poses = if scene.is_empty() {
        Vec::new()
    } else {
        plan_grasps(&depth, &background, &KChoice::Fixed(k), &ep.planner, seed).map_err(to_py)?
    };
    for p in &mut poses {
        p.local_clutter = Some(local_score(&map, p.center, ep.planner.opening_px).map_err(to_py)?);
    }
    json(&serde_json::json!({ "global": global_score(&map), "poses": poses }))
}

/// Runs a batch from an experiment config JSON (missing fields default)
/// and returns the metrics report as JSON.
#[pyfunction]
#[pyo3(signature = (config_json=None))]
pub fn run_batch(py: Python<'_>, config_json: Option<&str>) -> PyResult<String> {
    let cfg = parse_config(config_json)?;
    let result = py.detach(|| core_run_batch(&cfg)).map_err(to_py)?;
    json(&result.report)
}

/// Applies the push-vs-grasp rules to a global score and the local scores
/// of the top poses (best GDI first). Returns `(action, rationale, index)`
/// where `index` is the chosen pose for a grasp or the push target.
#[pyfunction]
#[pyo3(signature = (global_score, local_scores, failure_count, t_global=None, t_local=None))]
pub fn decide_action(
    global_score: f64,
    local_scores: Vec<f64>,
    failure_count: usize,
    t_global: Option<f64>,
    t_local: Option<f64>,
) -> PyResult<(String, String, usize)> {
    if local_scores.is_empty() {
        return Err(PyValueError::new_err("need at least one local score"));
    }
    let mut th = PolicyThresholds::default();
    th.t_global = t_global.unwrap_or(th.t_global);
    th.t_local = t_local.unwrap_or(th.t_local);
    th.validate().map_err(to_py)?;
    let poses: Vec<GraspPose> = local_scores
        .iter()
        .enumerate()
        .map(|(i, &l)| GraspPose {
            center: Pixel { x: i as i64, y: 0 },
            angle: 0.0,
            opening_px: 40.0,
            gdi: 1.0,
            local_clutter: Some(l),
        })
        .collect();
    let d = core_decide(global_score, &poses, failure_count, &th);
    let rationale = json(&d.rationale)?.trim_matches('"').to_string();
    Ok(match d.kind {
        DecisionKind::Grasp(p) => ("grasp".into(), rationale, p.center.x as usize),
        DecisionKind::Push { target } => ("push".into(), rationale, target.center.x as usize),
    })
}

/// Euclidean distance to the nearest set cell or the image border, per cell.
#[pyfunction]
pub fn distance_transform(mask: Vec<Vec<bool>>) -> PyResult<Vec<Vec<f64>>> {
    let h = mask.len();
    let w = mask.first().map_or(0, Vec::len);
    if w == 0 || mask.iter().any(|r| r.len() != w) {
        return Err(PyValueError::new_err("mask must be a non-empty rectangular list of rows"));
    }
    let grid = Grid::from_vec(w, h, mask.into_iter().flatten().collect()).map_err(to_py)?;
    let field = dc::push::distance_transform(&grid);
    Ok(field.data().chunks(w).map(<[f64]>::to_vec).collect())
}

#[pymodule]
#[pyo3(name = "declutter")]
fn declutter_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(spawn_heap, m)?)?;
    m.add_function(wrap_pyfunction!(clutter_scores, m)?)?;
    m.add_function(wrap_pyfunction!(run_batch, m)?)?;
    m.add_function(wrap_pyfunction!(decide_action, m)?)?;
    m.add_function(wrap_pyfunction!(distance_transform, m)?)?;
    Ok(())
}
