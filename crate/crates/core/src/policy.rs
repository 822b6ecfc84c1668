//! Push-versus-grasp decision rule and the declutter episode loop.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::clutter::{compute_clutter_map, score, FcmParams};
use crate::error::{Error, Result};
use crate::grasp::{depth_filter, plan_grasps, GraspPose, KChoice, KModel, PlannerParams, PoseRecord};
use crate::image::{DepthImage, Grid, Pixel};
use crate::push::{plan_boundary_push, plan_push, PushAction, PushActionRecord, PushParams};
use crate::simscene::{apply_push, execution_error, grasp_at, render, CameraModel, FailureReason, GripperParams, PushEvents, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyThresholds {
    pub t_global: f64,
    pub t_local: f64,
    pub n_top: usize,
    pub failure_limit: usize,
}

impl Default for PolicyThresholds {
    /// Values produced by `calibrate` on the default catalog and camera.
    fn default() -> Self {
        Self {
            t_global: 0.055,
            t_local: 0.245,
            n_top: 3,
            failure_limit: 3,
        }
    }
}

impl PolicyThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_global > 0.0 && self.t_local > 0.0) {
            return Err(Error::Config("t_global and t_local must be positive".into()));
        }
        if self.n_top == 0 || self.failure_limit == 0 {
            return Err(Error::Config("n_top and failure_limit must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rationale {
    GlobalLow,
    LocalLow,
    AllLocalHigh,
    FailureOverride,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Grasp(GraspPose),
    /// Push out of the region around `target`; the stroke itself is planned
    /// from the current depth image.
    Push { target: GraspPose },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub kind: DecisionKind,
    pub rationale: Rationale,
}

fn local_or_inf(p: &GraspPose) -> f64 {
    p.local_clutter.unwrap_or(f64::INFINITY)
}

/// Applies the decision rules in order: failure override, low global
/// clutter, a low-clutter pose among the top poses, otherwise push.
///
/// `top_poses` must be non-empty and ordered best GDI first. Poses without
/// a local score count as infinitely cluttered.
pub fn decide_action(global: f64, top_poses: &[GraspPose], failure_count: usize, th: &PolicyThresholds) -> Decision {
    assert!(!top_poses.is_empty(), "decide_action needs at least one pose");
    let best = top_poses[0];
    if failure_count >= th.failure_limit {
        return Decision {
            kind: DecisionKind::Push { target: best },
            rationale: Rationale::FailureOverride,
        };
    }
    if global < th.t_global {
        return Decision {
            kind: DecisionKind::Grasp(best),
            rationale: Rationale::GlobalLow,
        };
    }
    // first minimum wins, so ties go to the better GDI
    let calmest = top_poses
        .iter()
        .copied()
        .reduce(|a, b| if local_or_inf(&b) < local_or_inf(&a) { b } else { a })
        .expect("non-empty");
    if local_or_inf(&calmest) < th.t_local {
        Decision {
            kind: DecisionKind::Grasp(calmest),
            rationale: Rationale::LocalLow,
        }
    } else {
        Decision {
            kind: DecisionKind::Push { target: best },
            rationale: Rationale::AllLocalHigh,
        }
    }
}

/// How the planner's cluster count is chosen during an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KSource {
    Fixed(usize),
    /// The true number of objects left on the table.
    Exact,
    Estimated(KModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    /// Camera resolution, px/m.
    pub camera_scale: f64,
    pub gripper: GripperParams,
    pub planner: PlannerParams,
    pub k: KSource,
    pub fcm: FcmParams,
    pub thresholds: PolicyThresholds,
    pub push: PushParams,
    /// Enables the push-vs-grasp policy; otherwise the best GDI pose is
    /// always grasped.
    pub use_policy: bool,
    /// Computes clutter scores even when the policy does not need them.
    pub record_clutter: bool,
    /// Action budget per initial object.
    pub max_attempts_factor: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            camera_scale: 400.0,
            gripper: GripperParams::default(),
            planner: PlannerParams::default(),
            k: KSource::Fixed(10),
            fcm: FcmParams::default(),
            thresholds: PolicyThresholds::default(),
            push: PushParams::default(),
            use_policy: true,
            record_clutter: true,
            max_attempts_factor: 3,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.camera_scale > 0.0) {
            return Err(Error::Config("camera_scale must be positive".into()));
        }
        self.planner.gdi.validate(self.planner.opening_px)?;
        self.thresholds.validate()?;
        if let KSource::Fixed(0) = self.k {
            return Err(Error::Config("fixed k must be at least 1".into()));
        }
        if self.max_attempts_factor == 0 || self.planner.n_top == 0 {
            return Err(Error::Config("max_attempts_factor and n_top must be at least 1".into()));
        }
        if !(self.push.step_px > 0.0) {
            return Err(Error::Config("push step_px must be positive".into()));
        }
        Ok(())
    }

    fn needs_clutter(&self) -> bool {
        self.use_policy || self.record_clutter || matches!(self.k, KSource::Estimated(_))
    }
}

/// SplitMix64 finalizer; derives independent per-step seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Grasp,
    Push,
    /// A push was chosen but no entry point or resolution was found.
    NoOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    WorkspaceEmpty,
    MaxAttempts,
    /// Objects remain but no grasp rectangle fits inside the image.
    NoPoses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub attempt: usize,
    pub objects_before: usize,
    pub action: ActionKind,
    pub rationale: Option<Rationale>,
    pub k_used: usize,
    pub grasp_success: bool,
    pub multi_pick: bool,
    pub picked_ids: Vec<u32>,
    pub failure_reason: Option<FailureReason>,
    pub global_score: Option<f64>,
    pub local_score_of_target: Option<f64>,
    pub pose: Option<PoseRecord>,
    pub push: Option<PushActionRecord>,
    pub events: Option<PushEvents>,
    pub failure_count_before: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub initial_objects: usize,
    pub remaining_objects: usize,
    pub termination: Termination,
    pub grasp_attempts: usize,
    pub successes: usize,
    pub multi_picks: usize,
    pub picked_objects: usize,
    pub pushes: usize,
    pub noops: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub seed: u64,
    pub initial_objects: usize,
    pub records: Vec<EpisodeRecord>,
    pub termination: Termination,
    pub remaining_objects: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogLine {
    Attempt(EpisodeRecord),
    Summary(EpisodeSummary),
}

impl EpisodeLog {
    pub fn grasp_records(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.records.iter().filter(|r| r.action == ActionKind::Grasp)
    }

    pub fn summary(&self) -> EpisodeSummary {
        let grasps: Vec<_> = self.grasp_records().collect();
        EpisodeSummary {
            seed: self.seed,
            initial_objects: self.initial_objects,
            remaining_objects: self.remaining_objects,
            termination: self.termination,
            grasp_attempts: grasps.len(),
            successes: grasps.iter().filter(|r| r.grasp_success).count(),
            multi_picks: grasps.iter().filter(|r| r.multi_pick).count(),
            picked_objects: grasps.iter().map(|r| r.picked_ids.len()).sum(),
            pushes: self.records.iter().filter(|r| r.action == ActionKind::Push).count(),
            noops: self.records.iter().filter(|r| r.action == ActionKind::NoOp).count(),
        }
    }

    /// One JSON line per record followed by a summary line.
    pub fn write_jsonl<W: Write>(&self, out: &mut W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut *out, &LogLine::Attempt(r.clone()))?;
            out.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut *out, &LogLine::Summary(self.summary()))?;
        out.write_all(b"\n")?;
        Ok(())
    }

    /// Parses a stream of concatenated episode logs as written by
    /// [`EpisodeLog::write_jsonl`].
    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<EpisodeLog>> {
        let mut logs = Vec::new();
        let mut pending = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<LogLine>(&line)? {
                LogLine::Attempt(r) => pending.push(r),
                LogLine::Summary(s) => logs.push(EpisodeLog {
                    seed: s.seed,
                    initial_objects: s.initial_objects,
                    records: std::mem::take(&mut pending),
                    termination: s.termination,
                    remaining_objects: s.remaining_objects,
                }),
            }
        }
        if !pending.is_empty() {
            return Err(Error::Config("episode log ends without a summary line".into()));
        }
        Ok(logs)
    }
}

/// Plans a push out of the region around `target`, falling back to the
/// other top poses and finally to a push entering from the image border.
fn plan_push_with_fallback(
    depth: &DepthImage,
    background: &DepthImage,
    target: &GraspPose,
    poses: &[GraspPose],
    cfg: &EpisodeConfig,
) -> Result<Option<PushAction>> {
    let mask = depth_filter(depth, background, cfg.planner.depth_delta)?;
    let order = std::iter::once(target.center).chain(poses.iter().map(|p| p.center).filter(|&c| c != target.center));
    for center in order {
        match plan_push(depth, &mask, center, &cfg.push) {
            Ok(a) => return Ok(Some(a)),
            Err(Error::NoEntryPoint) => {}
            Err(e) => return Err(e),
        }
    }
    match plan_boundary_push(depth, &mask, target.center, &cfg.push) {
        Ok(a) => Ok(Some(a)),
        Err(Error::NoEntryPoint) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Runs one declutter episode until the table is empty, no pose fits, or
/// the action budget (`max_attempts_factor` × initial objects) is spent.
/// Deterministic in `(initial, cfg, seed)`.
pub fn run_episode(initial: &Scene, cfg: &EpisodeConfig, seed: u64) -> Result<EpisodeLog> {
    cfg.validate()?;
    let cam = CameraModel::covering(&initial.workspace, cfg.camera_scale);
    let background: DepthImage = Grid::filled(cam.width, cam.height, initial.table_depth);
    let max_attempts = cfg.max_attempts_factor * initial.len();
    let mut scene = initial.clone();
    let mut records = Vec::new();
    let mut failure_count = 0usize;

    let termination = loop {
        let (rgb, depth) = render(&scene, &cam);
        let mask = depth_filter(&depth, &background, cfg.planner.depth_delta)?;
        if mask.count_set() == 0 {
            break Termination::WorkspaceEmpty;
        }
        if records.len() >= max_attempts {
            break Termination::MaxAttempts;
        }
        let attempt = records.len();

        let map = if cfg.needs_clutter() {
            Some(compute_clutter_map(&rgb, &cfg.fcm)?)
        } else {
            None
        };
        let global = map.as_ref().map(crate::clutter::global_score);
        let k = match cfg.k {
            KSource::Fixed(k) => KChoice::Fixed(k),
            KSource::Exact => KChoice::Fixed(scene.len().max(1)),
            KSource::Estimated(model) => KChoice::Estimated {
                model,
                global_clutter: global.expect("clutter computed for estimated k"),
            },
        };
        let attempt_seed = mix_seed(seed, attempt as u64);
        let mut poses = match plan_grasps(&depth, &background, &k, &cfg.planner, attempt_seed) {
            Ok(p) => p,
            Err(Error::NoCandidates) => break Termination::WorkspaceEmpty,
            Err(e) => return Err(e),
        };
        if poses.is_empty() {
            break Termination::NoPoses;
        }
        if let Some(map) = &map {
            let centers: Vec<Pixel> = poses.iter().map(|p| p.center).collect();
            let scores = score(map, &centers, cfg.planner.opening_px)?;
            for (i, s) in scores.per_pose_local {
                poses[i].local_clutter = Some(s);
            }
        }
        let k_used = match k {
            KChoice::Fixed(k) => k,
            KChoice::Estimated { model, global_clutter } => {
                model.estimate(crate::grasp::estimate_area_spread(&mask), global_clutter)
            }
        };

        let (kind, rationale) = if cfg.use_policy {
            let d = decide_action(global.expect("policy computes clutter"), &poses, failure_count, &cfg.thresholds);
            (d.kind, Some(d.rationale))
        } else {
            (DecisionKind::Grasp(poses[0]), None)
        };

        let mut record = EpisodeRecord {
            attempt,
            objects_before: scene.len(),
            action: ActionKind::Grasp,
            rationale,
            k_used,
            grasp_success: false,
            multi_pick: false,
            picked_ids: Vec::new(),
            failure_reason: None,
            global_score: global,
            local_score_of_target: None,
            pose: None,
            push: None,
            events: None,
            failure_count_before: failure_count,
        };

        match kind {
            DecisionKind::Grasp(pose) => {
                let (shift, turn) = execution_error(&cfg.gripper, mix_seed(attempt_seed, 1));
                let at = cam.pixel_to_world(pose.center) + shift;
                let (next, outcome) = grasp_at(&scene, at, pose.angle + turn, &cfg.gripper);
                record.local_score_of_target = pose.local_clutter;
                record.pose = Some(PoseRecord::from(&pose));
                record.grasp_success = outcome.success;
                record.multi_pick = outcome.multi_pick;
                record.picked_ids = outcome.picked_ids;
                record.failure_reason = Some(outcome.failure_reason);
                if outcome.success {
                    failure_count = 0;
                } else {
                    failure_count += 1;
                }
                scene = next;
            }
            DecisionKind::Push { target } => {
                record.local_score_of_target = target.local_clutter;
                record.pose = Some(PoseRecord::from(&target));
                if rationale == Some(Rationale::FailureOverride) {
                    failure_count = 0;
                }
                match plan_push_with_fallback(&depth, &background, &target, &poses, cfg)? {
                    Some(action) => {
                        record.push = Some(PushActionRecord::from(&action));
                        match apply_push(&scene, &action.to_stroke(&cam), &cfg.gripper) {
                            Ok((next, events)) => {
                                record.action = ActionKind::Push;
                                record.events = Some(events);
                                scene = next;
                            }
                            Err(Error::NonConvergence { .. }) => record.action = ActionKind::NoOp,
                            Err(e) => return Err(e),
                        }
                    }
                    None => record.action = ActionKind::NoOp,
                }
            }
        }
        records.push(record);
    };

    Ok(EpisodeLog {
        seed,
        initial_objects: initial.len(),
        records,
        termination,
        remaining_objects: scene.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Rect, Vec2};
    use crate::simscene::{default_catalog, spawn_heap};

    fn pose(gdi: f64, local: f64, x: i64) -> GraspPose {
        GraspPose {
            center: Pixel::new(x, 10),
            angle: 0.0,
            opening_px: 40.0,
            gdi,
            local_clutter: Some(local),
        }
    }

    fn th() -> PolicyThresholds {
        PolicyThresholds {
            t_global: 0.3,
            t_local: 0.4,
            ..PolicyThresholds::default()
        }
    }

    #[test]
    fn low_global_grasps_best_gdi() {
        let poses = [pose(0.9, 0.8, 1), pose(0.5, 0.1, 2)];
        let d = decide_action(0.1, &poses, 0, &th());
        assert_eq!(d.rationale, Rationale::GlobalLow);
        assert_eq!(d.kind, DecisionKind::Grasp(poses[0]));
    }

    #[test]
    fn all_local_high_pushes() {
        let poses = [pose(0.9, 0.6, 1), pose(0.8, 0.7, 2), pose(0.7, 0.8, 3)];
        let d = decide_action(0.5, &poses, 0, &th());
        assert_eq!(d.rationale, Rationale::AllLocalHigh);
        assert_eq!(d.kind, DecisionKind::Push { target: poses[0] });
    }

    #[test]
    fn calmest_pose_is_grasped() {
        let poses = [pose(0.9, 0.6, 1), pose(0.8, 0.2, 2), pose(0.7, 0.3, 3)];
        let d = decide_action(0.5, &poses, 2, &th());
        assert_eq!(d.rationale, Rationale::LocalLow);
        assert_eq!(d.kind, DecisionKind::Grasp(poses[1]));
    }

    #[test]
    fn three_failures_override_everything() {
        let poses = [pose(0.9, 0.0, 1)];
        let d = decide_action(0.05, &poses, 3, &th());
        assert_eq!(d.rationale, Rationale::FailureOverride);
    }

    #[test]
    fn threshold_validation() {
        assert!(th().validate().is_ok());
        for bad in [
            PolicyThresholds { t_global: 0.0, ..th() },
            PolicyThresholds { t_local: -1.0, ..th() },
            PolicyThresholds { n_top: 0, ..th() },
            PolicyThresholds { failure_limit: 0, ..th() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn empty_scene_ends_immediately() {
        let ws = Rect::new(Vec2::new(0.0, 0.0), Vec2::new(0.45, 0.45));
        let log = run_episode(&Scene::empty(ws, 0.65), &EpisodeConfig::default(), 1).unwrap();
        assert!(log.records.is_empty());
        assert_eq!(log.termination, Termination::WorkspaceEmpty);
    }

    #[test]
    fn episode_is_deterministic_and_round_trips() {
        let ws = Rect::new(Vec2::new(0.0, 0.0), Vec2::new(0.45, 0.45));
        let scene = spawn_heap(4, 6, &default_catalog(), ws, 0.65).unwrap();
        let cfg = EpisodeConfig::default();
        let a = run_episode(&scene, &cfg, 9).unwrap();
        let b = run_episode(&scene, &cfg, 9).unwrap();
        assert_eq!(a, b);
        assert!(!a.records.is_empty());
        assert!(a.records.len() <= 18);

        let mut buf = Vec::new();
        a.write_jsonl(&mut buf).unwrap();
        b.write_jsonl(&mut buf).unwrap();
        let back = EpisodeLog::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, vec![a.clone(), a]);
    }

    #[test]
    fn mixed_seeds_differ() {
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
        assert_ne!(mix_seed(1, 0), mix_seed(2, 0));
    }
}
