//! Depth-based grasp planning: background subtraction, object-count
//! estimation, k-means candidate clustering and GDI ranking.

pub mod gdi;
pub mod kmeans;
pub mod kmodel;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{BinaryMask, DepthImage, Grid, Pixel};
pub use gdi::{compute_gdi, GdiParams};
pub use kmeans::{cluster_candidates, kmeans, KMeansResult};
pub use kmodel::{estimate_k, fit_k_model, mean_abs_error, KModel, KSample};

/// Candidate closing-axis angles: 0°, 15°, …, 165°.
pub const ANGLE_STEPS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    pub center: Pixel,
    /// Closing-axis direction in the image plane, radians in `[0, π)`.
    pub angle: f64,
    pub opening_px: f64,
    pub gdi: f64,
    /// Mean clutter around the pose, once scored.
    pub local_clutter: Option<f64>,
}

/// Flat JSON record used when exporting pose lists.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub cx: i64,
    pub cy: i64,
    pub angle_deg: f64,
    pub opening_px: f64,
    pub gdi: f64,
}

impl From<&GraspPose> for PoseRecord {
    fn from(p: &GraspPose) -> Self {
        Self {
            cx: p.center.x,
            cy: p.center.y,
            angle_deg: p.angle.to_degrees(),
            opening_px: p.opening_px,
            gdi: p.gdi,
        }
    }
}

/// Marks pixels at least `delta` meters above the known background.
pub fn depth_filter(depth: &DepthImage, background: &DepthImage, delta: f64) -> Result<BinaryMask> {
    if depth.dims() != background.dims() {
        return Err(Error::ShapeMismatch {
            expected: background.dims(),
            found: depth.dims(),
        });
    }
    let data = depth
        .data()
        .iter()
        .zip(background.data())
        .map(|(d, b)| b - d >= delta)
        .collect();
    Grid::from_vec(depth.width(), depth.height(), data)
}

/// Fraction of object pixels.
pub fn estimate_area_spread(mask: &BinaryMask) -> f64 {
    mask.count_set() as f64 / mask.len() as f64
}

/// How the number of clusters is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KChoice {
    Fixed(usize),
    Estimated { model: KModel, global_clutter: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    pub gdi: GdiParams,
    pub opening_px: f64,
    pub n_top: usize,
    /// Minimum height above the background for a pixel to count as object, m.
    pub depth_delta: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            gdi: GdiParams::default(),
            opening_px: 40.0,
            n_top: 3,
            depth_delta: 0.01,
        }
    }
}

/// Best angle for a candidate center, or `None` when every rectangle leaves
/// the image. Ties keep the smaller angle.
pub fn best_pose_at(depth: &DepthImage, center: Pixel, gdi: &GdiParams, opening_px: f64) -> Result<Option<GraspPose>> {
    let mut best: Option<GraspPose> = None;
    for step in 0..ANGLE_STEPS {
        let angle = step as f64 * std::f64::consts::PI / ANGLE_STEPS as f64;
        match compute_gdi(depth, center, angle, gdi, opening_px) {
            Ok(g) => {
                if best.is_none_or(|b| g > b.gdi) {
                    best = Some(GraspPose {
                        center,
                        angle,
                        opening_px,
                        gdi: g,
                        local_clutter: None,
                    });
                }
            }
            Err(Error::RectangleOutOfBounds) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

/// Full planning pipeline. Returns at most `n_top` poses, best GDI first.
pub fn plan_grasps(
    depth: &DepthImage,
    background: &DepthImage,
    k: &KChoice,
    params: &PlannerParams,
    seed: u64,
) -> Result<Vec<GraspPose>> {
    if params.n_top == 0 {
        return Err(Error::Config("n_top must be at least 1".into()));
    }
    params.gdi.validate(params.opening_px)?;
    let mask = depth_filter(depth, background, params.depth_delta)?;
    let available = mask.count_set();
    if available == 0 {
        return Err(Error::NoCandidates);
    }
    let k = match k {
        KChoice::Fixed(k) => *k,
        KChoice::Estimated { model, global_clutter } => model.estimate(estimate_area_spread(&mask), *global_clutter),
    }
    .clamp(1, available);

    let mut centers = cluster_candidates(&mask, k, seed)?;
    centers.sort_by_key(|p| (p.y, p.x));
    centers.dedup();

    let mut poses = Vec::with_capacity(centers.len());
    for c in centers {
        if let Some(p) = best_pose_at(depth, c, &params.gdi, params.opening_px)? {
            poses.push(p);
        }
    }
    // stable sort keeps the row-major order among equal GDI values
    poses.sort_by(|a, b| b.gdi.total_cmp(&a.gdi));
    poses.truncate(params.n_top);
    Ok(poses)
}
