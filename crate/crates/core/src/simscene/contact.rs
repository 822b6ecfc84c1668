//! Quasi-static push resolution.
//!
//! The closed gripper sweeps a straight corridor. Everything it touches is
//! carried to just in front of the gripper's final position; cascaded
//! overlaps are then removed by pairwise separation, first along the push
//! direction and otherwise by minimum translation.

use serde::{Deserialize, Serialize};

use super::{GripperParams, Scene};
use crate::error::{Error, Result};
use crate::geometry::{directional_separation, oriented_rect, penetration, Footprint, Rect, Vec2};

const MAX_ITERATIONS: usize = 100;
const ESCAPE_DIRECTIONS: usize = 16;
/// Overlap below this is treated as contact, not penetration.
const CONTACT_SLOP: f64 = 1e-7;
/// Extra travel added to every separation so pairs end strictly apart.
const SEPARATION_SKIN: f64 = 1e-6;

/// A straight push in the workspace frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushStroke {
    pub start: Vec2,
    pub end: Vec2,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PushEvents {
    /// Objects touched directly by the gripper.
    pub contacted: Vec<u32>,
    /// Every object whose pose changed, in id order.
    pub moved: Vec<u32>,
    /// Objects stopped at the workspace boundary.
    pub clamped: Vec<u32>,
    pub iterations: usize,
}

/// Translation that brings `fp` back inside `ws`, or zero.
fn clamp_offset(fp: &Footprint, ws: &Rect) -> Vec2 {
    let b = fp.bounds();
    let axis = |lo: f64, hi: f64, wlo: f64, whi: f64| {
        if lo < wlo {
            wlo - lo
        } else if hi > whi {
            whi - hi
        } else {
            0.0
        }
    };
    Vec2::new(
        axis(b.min.x, b.max.x, ws.min.x, ws.max.x),
        axis(b.min.y, b.max.y, ws.min.y, ws.max.y),
    )
}

/// Shortest in-bounds move of `mover` that clears `other`, over a fan of
/// directions.
fn escape(footprints: &[Footprint], ws: &Rect, mover: usize, other: usize) -> Option<(usize, Vec2)> {
    (0..ESCAPE_DIRECTIONS)
        .filter_map(|k| {
            let dir = Vec2::from_angle(k as f64 * std::f64::consts::TAU / ESCAPE_DIRECTIONS as f64);
            let t = directional_separation(&footprints[other], &footprints[mover], dir);
            let d = dir * (t + SEPARATION_SKIN);
            (t.is_finite() && clamp_offset(&footprints[mover].translated(d), ws) == Vec2::ZERO).then_some((t, d))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, d)| (mover, d))
}

/// Executes a push and returns the resolved scene. The input scene is left
/// untouched.
pub fn apply_push(scene: &Scene, stroke: &PushStroke, gripper: &GripperParams) -> Result<(Scene, PushEvents)> {
    let mut out = scene.clone();
    let mut events = PushEvents::default();
    let delta = stroke.end - stroke.start;
    let length = delta.norm();
    if length <= 0.0 {
        return Ok((out, events));
    }
    let dir = delta * (1.0 / length);
    let half_thick = gripper.finger_thickness / 2.0;
    let corridor = oriented_rect(
        (stroke.start + stroke.end) * 0.5,
        dir,
        length / 2.0 + half_thick,
        gripper.finger_span / 2.0,
    );
    let front = stroke.end.dot(dir) + half_thick;

    let n = out.objects.len();
    let mut footprints: Vec<Footprint> = out.objects.iter().map(|o| o.footprint()).collect();
    let mut active = vec![false; n];
    let mut pinned = vec![false; n];
    let start_poses: Vec<Vec2> = out.objects.iter().map(|o| o.pose.position()).collect();

    let shift = |i: usize, d: Vec2, footprints: &mut [Footprint], pinned: &mut [bool], out: &mut Scene| {
        let moved = footprints[i].translated(d);
        let fix = clamp_offset(&moved, &out.workspace);
        let total = d + fix;
        if fix != Vec2::ZERO {
            pinned[i] = true;
        }
        footprints[i] = footprints[i].translated(total);
        out.objects[i].translate(total);
    };

    for i in 0..n {
        if penetration(&corridor, &footprints[i]).is_some() {
            let (rear, _) = footprints[i].project(dir);
            let travel = (front - rear).max(0.0);
            events.contacted.push(out.objects[i].id);
            active[i] = true;
            if travel > 0.0 {
                shift(i, dir * (travel + SEPARATION_SKIN), &mut footprints, &mut pinned, &mut out);
            }
        }
    }

    let mut converged = false;
    for iter in 0..MAX_ITERATIONS {
        events.iterations = iter + 1;
        let mut any = false;
        for i in 0..n {
            for j in i + 1..n {
                let Some((normal_ij, depth)) = penetration(&footprints[i], &footprints[j]) else {
                    continue;
                };
                if depth <= CONTACT_SLOP {
                    continue;
                }
                any = true;
                // choose which body yields
                let (mover, other, away) = if pinned[i] != pinned[j] {
                    if pinned[i] {
                        (j, i, normal_ij)
                    } else {
                        (i, j, -normal_ij)
                    }
                } else if active[i] != active[j] {
                    if active[i] {
                        (j, i, normal_ij)
                    } else {
                        (i, j, -normal_ij)
                    }
                } else {
                    let pi = footprints[i].centroid().dot(dir);
                    let pj = footprints[j].centroid().dot(dir);
                    if pj >= pi {
                        (j, i, normal_ij)
                    } else {
                        (i, j, -normal_ij)
                    }
                };
                let along = directional_separation(&footprints[other], &footprints[mover], dir);
                let use_dir = !pinned[mover] && !pinned[other] && along.is_finite() && along <= 4.0 * depth.max(0.005);
                let d = if use_dir {
                    dir * (along + SEPARATION_SKIN)
                } else {
                    away * (depth + SEPARATION_SKIN)
                };
                let (mover, d) = if clamp_offset(&footprints[mover].translated(d), &out.workspace) == Vec2::ZERO {
                    (mover, d)
                } else {
                    // the wall would cancel the move; slide out sideways instead
                    escape(&footprints, &out.workspace, mover, other)
                        .or_else(|| escape(&footprints, &out.workspace, other, mover))
                        .unwrap_or((mover, d))
                };
                shift(mover, d, &mut footprints, &mut pinned, &mut out);
                active[mover] = true;
            }
        }
        if !any {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations: MAX_ITERATIONS });
    }

    for (i, o) in out.objects.iter().enumerate() {
        if o.pose.position() != start_poses[i] {
            events.moved.push(o.id);
        }
        if pinned[i] {
            events.clamped.push(o.id);
        }
    }
    Ok((out, events))
}
