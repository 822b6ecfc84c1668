//! Reference computations and deterministic checks shared by the oracle,
//! property and acceptance targets. Each check returns a short summary on
//! success and the first counterexample on failure.
#![allow(dead_code)]

use declutter::clutter::{compute_clutter_map, FcmParams};
use declutter::experiment::{default_workspace, run_batch, write_logs_jsonl, ExperimentConfig, Variant};
use declutter::geometry::{overlap_depth, Vec2};
use declutter::grasp::{compute_gdi, fit_k_model, kmeans, GdiParams, GraspPose, KSample};
use declutter::image::{Grid, Pixel};
use declutter::metrics::{compute_metrics, Durations};
use declutter::policy::{decide_action, ActionKind, DecisionKind, EpisodeLog, EpisodeRecord, PolicyThresholds, Rationale, Termination};
use declutter::push::squared_distance_transform;
use declutter::Error;
use declutter::simscene::{apply_push, default_catalog, grasp_at, render, spawn_heap, CameraModel, GripperParams, PushStroke, Scene};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

pub fn brute_sq_distance(mask: &Grid<bool>, x: usize, y: usize) -> i64 {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let (xi, yi) = (x as i64, y as i64);
    // nearest pixel of the ring just outside the image
    let border = (xi + 1).min(w - xi).min(yi + 1).min(h - yi);
    let mut best = border * border;
    for py in 0..h {
        for px in 0..w {
            if *mask.get(px as usize, py as usize) {
                best = best.min((px - xi).pow(2) + (py - yi).pow(2));
            }
        }
    }
    best
}

pub fn check_distance_transform(masks: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for case in 0..masks {
        let density = rng.gen_range(0.0..0.3);
        let mask = Grid::from_fn(32, 32, |_, _| rng.gen_bool(density));
        let dt = squared_distance_transform(&mask);
        for y in 0..32 {
            for x in 0..32 {
                let want = brute_sq_distance(&mask, x, y);
                if *dt.get(x, y) != want {
                    return Err(format!("mask {case} at ({x}, {y}): {} vs {want}", dt.get(x, y)));
                }
            }
        }
    }
    Ok(format!("{masks} masks of 32x32 exact"))
}

fn interp(img: &Grid<f64>, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let at = |xx: f64, yy: f64| {
        let xi = (xx as usize).min(img.width() - 1);
        let yi = (yy as usize).min(img.height() - 1);
        *img.get(xi, yi)
    };
    let top = at(x0, y0) + fx * (at(x0 + 1.0, y0) - at(x0, y0));
    let bottom = at(x0, y0 + 1.0) + fx * (at(x0 + 1.0, y0 + 1.0) - at(x0, y0 + 1.0));
    top + fy * (bottom - top)
}

/// Enumerates the finger samples: `n` distances evenly spaced from `lct` to
/// half the opening on both sides, `w` rows one pixel apart.
pub fn gdi_oracle(depth: &Grid<f64>, c: Pixel, angle: f64, p: &GdiParams, opening: f64) -> f64 {
    let (s, co) = angle.sin_cos();
    let center = *depth.get(c.x as usize, c.y as usize);
    let n = p.samples_per_side;
    let w = p.finger_width_px;
    let mut free = 0;
    let mut total = 0;
    for side in [-1.0, 1.0] {
        for i in 0..n {
            let d = p.lct + (opening / 2.0 - p.lct) * i as f64 / (n - 1) as f64;
            for j in 0..w {
                let r = j as f64 - (w as f64 - 1.0) / 2.0;
                let x = c.x as f64 + side * d * co - r * s;
                let y = c.y as f64 + side * d * s + r * co;
                total += 1;
                if interp(depth, x, y) >= center + p.hct {
                    free += 1;
                }
            }
        }
    }
    free as f64 / total as f64
}

pub fn check_gdi_enumeration(scenes: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for case in 0..scenes {
        let mut depth = Grid::filled(96, 96, 0.65);
        for _ in 0..rng.gen_range(1..6) {
            let (x0, y0) = (rng.gen_range(10..70), rng.gen_range(10..70));
            let (bw, bh) = (rng.gen_range(4..24), rng.gen_range(4..24));
            let top: f64 = 0.65 - 0.01 * rng.gen_range(1..10) as f64;
            for y in y0..(y0 + bh).min(96) {
                for x in x0..(x0 + bw).min(96) {
                    let v = depth.get_mut(x, y);
                    *v = f64::min(*v, top);
                }
            }
        }
        let params = GdiParams {
            lct: rng.gen_range(0..19) as f64,
            hct: 0.005 * rng.gen_range(0..6) as f64 + 0.0025,
            ..GdiParams::default()
        };
        let c = Pixel::new(rng.gen_range(30..66), rng.gen_range(30..66));
        let angle = (rng.gen_range(0..12) as f64 * 15.0).to_radians();
        let got = compute_gdi(&depth, c, angle, &params, 40.0).map_err(|e| e.to_string())?;
        let want = gdi_oracle(&depth, c, angle, &params, 40.0);
        worst = worst.max((got - want).abs());
        if (got - want).abs() > 1e-12 {
            return Err(format!("scene {case}: {got} vs {want}"));
        }
    }
    Ok(format!("{scenes} scenes, max |diff| {worst:e}"))
}

pub fn check_ols_recovery() -> Check {
    let beta = [1.5, 120.0, -30.0];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let samples: Vec<KSample> = (0..60)
        .map(|_| {
            let area = rng.gen_range(0.0..0.2);
            let g_cs = rng.gen_range(0.0..0.3);
            KSample {
                area,
                g_cs,
                k: beta[0] + beta[1] * area + beta[2] * g_cs,
            }
        })
        .collect();
    let m = fit_k_model(&samples).map_err(|e| e.to_string())?;
    let err = (0..3).map(|i| (m.beta[i] - beta[i]).abs()).fold(0.0, f64::max);
    if err < 1e-6 {
        Ok(format!("max |beta error| {err:e}"))
    } else {
        Err(format!("recovered {:?}", m.beta))
    }
}

fn random_log(rng: &mut ChaCha8Rng) -> EpisodeLog {
    let n = rng.gen_range(0..30);
    let records = (0..n)
        .map(|i| {
            let action = match rng.gen_range(0..10) {
                0 | 1 => ActionKind::Push,
                2 => ActionKind::NoOp,
                _ => ActionKind::Grasp,
            };
            let grasp = action == ActionKind::Grasp;
            let success = grasp && rng.gen_bool(0.7);
            EpisodeRecord {
                attempt: i,
                objects_before: rng.gen_range(1..=20),
                action,
                rationale: None,
                k_used: 1,
                grasp_success: success,
                multi_pick: success && rng.gen_bool(0.2),
                picked_ids: Vec::new(),
                failure_reason: None,
                global_score: None,
                local_score_of_target: grasp.then(|| rng.gen_range(0.0..1.0)),
                pose: None,
                push: None,
                events: None,
                failure_count_before: 0,
            }
        })
        .collect();
    EpisodeLog {
        seed: 0,
        initial_objects: 20,
        records,
        termination: Termination::MaxAttempts,
        remaining_objects: 0,
    }
}

pub fn check_metrics_identities(cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = Durations::default();
    let mut checked = 0;
    for case in 0..cases {
        let logs: Vec<EpisodeLog> = (0..rng.gen_range(1..5)).map(|_| random_log(&mut rng)).collect();
        let all: Vec<&EpisodeRecord> = logs.iter().flat_map(|l| &l.records).collect();
        let grasps: Vec<&&EpisodeRecord> = all.iter().filter(|r| r.action == ActionKind::Grasp).collect();
        let Ok(m) = compute_metrics(&logs, &d) else {
            if grasps.is_empty() {
                continue;
            }
            return Err(format!("case {case}: metrics failed with attempts present"));
        };
        checked += 1;
        let succ = grasps.iter().filter(|r| r.grasp_success).count();
        let multi = grasps.iter().filter(|r| r.multi_pick).count();
        let pushes = all.iter().filter(|r| r.action == ActionKind::Push).count();
        let time = grasps.len() as f64 * d.t_grasp_s + pushes as f64 * d.t_push_s + all.len() as f64 * d.t_perceive_s;
        let weighted: f64 = m.by_bin.iter().map(|b| b.gs * b.attempts as f64).sum::<f64>() / m.attempts as f64;
        let ok = m.attempts == grasps.len()
            && (m.successes, m.multi_picks, m.pushes, m.records) == (succ, multi, pushes, all.len())
            && (m.gs - 100.0 * succ as f64 / grasps.len() as f64).abs() < 1e-12
            && (m.gs_wm - (m.gs - m.mpc)).abs() < 1e-9
            && (m.mpph - 3600.0 * succ as f64 / time).abs() < 1e-9
            && m.by_bin.iter().map(|b| b.attempts).sum::<usize>() == m.attempts
            && (weighted - m.gs).abs() < 1e-9;
        if !ok {
            return Err(format!("case {case}: {m:?}"));
        }
    }
    Ok(format!("{checked} random log sets"))
}

pub fn check_clutter_zero_on_constant(cases: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let c = [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()];
        let map = compute_clutter_map(&Grid::filled(48, 40, c), &FcmParams::default()).map_err(|e| e.to_string())?;
        worst = map.values.data().iter().fold(worst, |w, v| w.max(v.abs()));
    }
    if worst <= 1e-9 {
        Ok(format!("{cases} colors, max |clutter| {worst:e}"))
    } else {
        Err(format!("max |clutter| {worst:e}"))
    }
}

pub fn check_clutter_rotation(scenes: u64) -> Check {
    let ws = default_workspace();
    let cam = CameraModel::covering(&ws, 200.0);
    let p = FcmParams::default();
    let mut worst: f64 = 0.0;
    for seed in 0..scenes {
        let scene = spawn_heap(seed, 8, &default_catalog(), ws, 0.65).map_err(|e| e.to_string())?;
        let (rgb, _) = render(&scene, &cam);
        let a = compute_clutter_map(&rgb, &p).map_err(|e| e.to_string())?.values.rotate90();
        let b = compute_clutter_map(&rgb.rotate90(), &p).map_err(|e| e.to_string())?.values;
        worst = a.data().iter().zip(b.data()).fold(worst, |w, (x, y)| w.max((x - y).abs()));
    }
    if worst <= 1e-6 {
        Ok(format!("{scenes} scenes, max |diff| {worst:e}"))
    } else {
        Err(format!("max |diff| {worst:e}"))
    }
}

pub fn check_gdi_rotation(cases: usize) -> Check {
    let ws = default_workspace();
    let cam = CameraModel::covering(&ws, 400.0);
    let p = GdiParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let scene = spawn_heap(case as u64, 12, &default_catalog(), ws, 0.65).map_err(|e| e.to_string())?;
        let (_, depth) = render(&scene, &cam);
        let w = depth.width() as i64;
        let rot = depth.rotate90();
        for _ in 0..20 {
            let (cx, cy) = (rng.gen_range(25..w - 25), rng.gen_range(25..w - 25));
            let angle = (rng.gen_range(0..12) as f64 * 15.0).to_radians();
            let g = compute_gdi(&depth, Pixel::new(cx, cy), angle, &p, 40.0).map_err(|e| e.to_string())?;
            // (x, y) -> (y, w - 1 - x) turns directions by -90°
            let gr = compute_gdi(&rot, Pixel::new(cy, w - 1 - cx), angle - std::f64::consts::FRAC_PI_2, &p, 40.0)
                .map_err(|e| e.to_string())?;
            worst = worst.max((g - gr).abs());
        }
    }
    if worst <= 1e-6 {
        Ok(format!("{} poses, max |diff| {worst:e}", cases * 20))
    } else {
        Err(format!("max |diff| {worst:e}"))
    }
}

pub fn check_kmeans_monotone(cases: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for case in 0..cases {
        let n = rng.gen_range(20..400);
        let k = rng.gen_range(1..15);
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.gen_range(0.0..180.0), rng.gen_range(0.0..180.0)]).collect();
        let r = kmeans(&pts, k, case).map_err(|e| e.to_string())?;
        if r.objective_trace.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
            return Err(format!("case {case}: {:?}", r.objective_trace));
        }
    }
    Ok(format!("{cases} runs non-increasing"))
}

pub fn max_overlap(scene: &Scene) -> f64 {
    let fps: Vec<_> = scene.objects.iter().map(|o| o.footprint()).collect();
    let mut worst: f64 = 0.0;
    for i in 0..fps.len() {
        for j in i + 1..fps.len() {
            worst = worst.max(overlap_depth(&fps[i], &fps[j]));
        }
    }
    worst
}

/// Random pushes and grasps on fresh heaps; every resulting scene must be
/// penetration free. Pushes rejected for non-convergence produce no scene
/// and are only counted.
pub fn check_non_penetration(heaps: u64, actions: usize) -> Check {
    let ws = default_workspace();
    let g = GripperParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut rejected = 0;
    for seed in 0..heaps {
        let mut scene = spawn_heap(seed, rng.gen_range(2..=20), &default_catalog(), ws, 0.65).map_err(|e| e.to_string())?;
        worst = worst.max(max_overlap(&scene));
        for _ in 0..actions {
            let start = Vec2::new(rng.gen_range(0.0..0.45), rng.gen_range(0.0..0.45));
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            if rng.gen_bool(0.5) {
                let stroke = PushStroke {
                    start,
                    end: start + Vec2::from_angle(a) * rng.gen_range(0.02..0.2),
                };
                let next = match apply_push(&scene, &stroke, &g) {
                    Ok((next, _)) => next,
                    Err(Error::NonConvergence { .. }) => {
                        rejected += 1;
                        continue;
                    }
                    Err(e) => return Err(format!("heap {seed}: {e}")),
                };
                if next.len() != scene.len() {
                    return Err(format!("heap {seed}: push changed the object count"));
                }
                scene = next;
            } else {
                scene = grasp_at(&scene, start, a, &g).0;
            }
            done += 1;
            worst = worst.max(max_overlap(&scene));
        }
    }
    if worst <= 1e-4 {
        Ok(format!("{done} actions, {rejected} pushes rejected, max overlap {worst:.2e} m"))
    } else {
        Err(format!("max overlap {worst:e} m"))
    }
}

/// Two runs of the same 50-episode batch must serialize identically.
pub fn check_determinism() -> Check {
    let cfg = ExperimentConfig {
        variant: Variant::DisperseGrasp,
        max_objects: 8,
        seeds: (100..150).collect(),
        // eight-object heaps take about ten attempts each
        trials: 600,
        ..ExperimentConfig::default()
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bytes = Vec::new();
    for run in 0..2 {
        let r = run_batch(&cfg).map_err(|e| e.to_string())?;
        if r.logs.len() < 50 {
            return Err(format!("only {} episodes", r.logs.len()));
        }
        let path = dir.path().join(format!("run{run}.jsonl"));
        write_logs_jsonl(&r.logs[..50], &path).map_err(|e| e.to_string())?;
        bytes.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    if !bytes[0].is_empty() && bytes[0] == bytes[1] {
        Ok(format!("50 episodes, {} identical bytes", bytes[0].len()))
    } else {
        Err("JSONL differs between runs".into())
    }
}

fn pose(local: f64, i: i64) -> GraspPose {
    GraspPose {
        center: Pixel::new(i, 0),
        angle: 0.0,
        opening_px: 40.0,
        gdi: 1.0,
        local_clutter: Some(local),
    }
}

/// Exhaustive grid over (global, min local, failure count): exactly one rule
/// applies and the decision matches it.
pub fn check_policy_partition() -> Check {
    let th = PolicyThresholds {
        t_global: 0.3,
        t_local: 0.4,
        ..PolicyThresholds::default()
    };
    let levels: Vec<f64> = (0..=20).map(|i| i as f64 * 0.05).collect();
    let mut n = 0;
    for &global in &levels {
        for &min_local in &levels {
            for failures in 0..=th.failure_limit + 2 {
                n += 1;
                // the calmest pose sits second so the choice is visible
                let poses = [pose(min_local + 0.2, 0), pose(min_local, 1), pose(min_local + 0.1, 2)];
                let d = decide_action(global, &poses, failures, &th);
                let over = failures >= th.failure_limit;
                let fired = [
                    over,
                    !over && global < th.t_global,
                    !over && global >= th.t_global && min_local < th.t_local,
                    !over && global >= th.t_global && min_local >= th.t_local,
                ];
                if fired.iter().filter(|&&f| f).count() != 1 {
                    return Err(format!("rules overlap at {global}, {min_local}, {failures}"));
                }
                let want = [Rationale::FailureOverride, Rationale::GlobalLow, Rationale::LocalLow, Rationale::AllLocalHigh]
                    [fired.iter().position(|&f| f).expect("one rule")];
                let kind_ok = match (want, d.kind) {
                    (Rationale::GlobalLow, DecisionKind::Grasp(p)) => p.center.x == 0,
                    (Rationale::LocalLow, DecisionKind::Grasp(p)) => p.center.x == 1,
                    (Rationale::FailureOverride | Rationale::AllLocalHigh, DecisionKind::Push { target }) => target.center.x == 0,
                    _ => false,
                };
                if d.rationale != want || !kind_ok {
                    return Err(format!("global {global} local {min_local} failures {failures}: {d:?}, want {want:?}"));
                }
            }
        }
    }
    Ok(format!("{n} grid points, one rule each"))
}
