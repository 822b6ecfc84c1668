//! Geometric grasp adjudication for a parallel-jaw gripper.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{CameraModel, GripperParams, Scene};
use crate::geometry::{oriented_rect, penetration, Vec2};
use crate::grasp::GraspPose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    None,
    Collision,
    TooWide,
    EmptyJaws,
    /// The closing line misses the load's centroid and it twists out.
    Slip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraspOutcome {
    pub success: bool,
    pub multi_pick: bool,
    pub picked_ids: Vec<u32>,
    pub failure_reason: FailureReason,
}

impl GraspOutcome {
    fn failure(reason: FailureReason) -> Self {
        Self {
            success: false,
            multi_pick: false,
            picked_ids: Vec::new(),
            failure_reason: reason,
        }
    }
}

/// Seeded offset between a commanded and an executed grasp: a center shift
/// in meters and an angle change in radians. Zero deviations give zero.
pub fn execution_error(gripper: &GripperParams, seed: u64) -> (Vec2, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |std: f64| if std > 0.0 { Normal::new(0.0, std).expect("finite deviation").sample(&mut rng) } else { 0.0 };
    let dx = draw(gripper.position_noise);
    let dy = draw(gripper.position_noise);
    let da = draw(gripper.angle_noise);
    (Vec2::new(dx, dy), da)
}

/// Attempts a grasp given as an image-plane pose.
pub fn attempt_grasp(scene: &Scene, pose: &GraspPose, gripper: &GripperParams, cam: &CameraModel) -> (Scene, GraspOutcome) {
    let center = cam.pixel_to_world(pose.center);
    grasp_at(scene, center, pose.angle, gripper)
}

/// Attempts a grasp centered at a workspace point with the closing axis at
/// `angle` (radians, image/workspace frame).
///
/// The fingers descend just inside both ends of the opening to the top of the tallest
/// object on the closing segment minus the insertion depth. Anything under a
/// finger footprint taller than that level is a collision. Otherwise every
/// object on the closing segment that reaches above that level is lifted,
/// provided they fit inside the opening less the grip margin on each side;
/// lower objects pass under the closing fingers. Finally the closing line
/// must pass close enough to the centroid of the gripped outline, else the
/// load twists out of the pads.
pub fn grasp_at(scene: &Scene, center: Vec2, angle: f64, gripper: &GripperParams) -> (Scene, GraspOutcome) {
    let axis = Vec2::from_angle(angle);
    let half = gripper.opening / 2.0;
    let footprints: Vec<_> = scene.objects.iter().map(|o| o.footprint()).collect();

    let on_segment: Vec<usize> = footprints
        .iter()
        .enumerate()
        .filter(|(_, fp)| fp.clip_line(center, axis, -half, half).is_some())
        .map(|(i, _)| i)
        .collect();

    let z_top = on_segment.iter().map(|&i| scene.objects[i].height).fold(0.0, f64::max);
    let z_ins = (z_top - gripper.insert_depth).max(0.0);

    for side in [-1.0, 1.0] {
        let finger_center = center + axis * (side * (half - gripper.finger_thickness / 2.0));
        let finger = oriented_rect(finger_center, axis, gripper.finger_thickness / 2.0, gripper.finger_width / 2.0);
        let blocked = footprints
            .iter()
            .zip(&scene.objects)
            .any(|(fp, o)| o.height > z_ins && penetration(&finger, fp).is_some());
        if blocked {
            return (scene.clone(), GraspOutcome::failure(FailureReason::Collision));
        }
    }

    let gripped: Vec<usize> = on_segment.iter().copied().filter(|&i| scene.objects[i].height > z_ins).collect();
    if gripped.is_empty() {
        return (scene.clone(), GraspOutcome::failure(FailureReason::EmptyJaws));
    }

    let (lo, hi) = gripped.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
        let (a, b) = footprints[i].project(axis);
        (lo.min(a), hi.max(b))
    });
    if hi - lo > gripper.opening - 2.0 * gripper.grip_margin {
        return (scene.clone(), GraspOutcome::failure(FailureReason::TooWide));
    }

    // Squeezing rotates the load about its centroid; too long a lever arm
    // from the closing line and it twists out of the pads.
    let (mut area, mut moment) = (0.0, Vec2::ZERO);
    for &i in &gripped {
        let a = footprints[i].area();
        area += a;
        moment = moment + footprints[i].centroid() * a;
    }
    let arm = (moment * (1.0 / area) - center).dot(axis.perp()).abs();
    if arm > gripper.max_grip_offset {
        return (scene.clone(), GraspOutcome::failure(FailureReason::Slip));
    }

    let mut out = scene.clone();
    let picked_ids: Vec<u32> = gripped.iter().map(|&i| scene.objects[i].id).collect();
    out.objects.retain(|o| !picked_ids.contains(&o.id));
    let outcome = GraspOutcome {
        success: true,
        multi_pick: picked_ids.len() >= 2,
        picked_ids,
        failure_reason: FailureReason::None,
    };
    (out, outcome)
}
