//! Grasp Decide Index: the fraction of finger-region samples that clear the
//! grasp center by at least the height-clearance threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::image::{DepthImage, Pixel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GdiParams {
    /// Lateral clearance threshold: nearest sample distance from the
    /// center along the closing axis, px.
    pub lct: f64,
    /// Height clearance threshold, m.
    pub hct: f64,
    pub finger_width_px: usize,
    pub samples_per_side: usize,
}

impl Default for GdiParams {
    fn default() -> Self {
        Self {
            lct: 16.0,
            hct: 0.02,
            finger_width_px: 5,
            samples_per_side: 10,
        }
    }
}

impl GdiParams {
    pub fn validate(&self, opening_px: f64) -> Result<()> {
        if !(self.lct >= 0.0 && self.lct < opening_px / 2.0) {
            return Err(Error::Config(format!(
                "lct {} must lie in [0, {})",
                self.lct,
                opening_px / 2.0
            )));
        }
        if !(self.hct >= 0.0) || self.finger_width_px == 0 || self.samples_per_side == 0 {
            return Err(Error::Config("hct must be >= 0 and sample counts positive".into()));
        }
        Ok(())
    }

    /// Distances from the center along the closing axis, `lct..=opening/2`.
    pub fn sample_distances(&self, opening_px: f64) -> Vec<f64> {
        let half = opening_px / 2.0;
        let n = self.samples_per_side;
        if n == 1 {
            return vec![self.lct];
        }
        (0..n).map(|i| self.lct + (half - self.lct) * i as f64 / (n - 1) as f64).collect()
    }

    /// Offsets across the closing axis, centered on it, 1 px apart.
    pub fn row_offsets(&self) -> Vec<f64> {
        let w = self.finger_width_px;
        (0..w).map(|j| j as f64 - (w - 1) as f64 / 2.0).collect()
    }
}

const BOUNDS_SLACK: f64 = 1e-9;

pub fn compute_gdi(depth: &DepthImage, center: Pixel, angle: f64, params: &GdiParams, opening_px: f64) -> Result<f64> {
    params.validate(opening_px)?;
    if !depth.contains(center) {
        return Err(Error::RectangleOutOfBounds);
    }
    let u = Vec2::from_angle(angle);
    let v = u.perp();
    let c = Vec2::new(center.x as f64, center.y as f64);
    let xmax = (depth.width() - 1) as f64 + BOUNDS_SLACK;
    let ymax = (depth.height() - 1) as f64 + BOUNDS_SLACK;

    let half = opening_px / 2.0;
    let half_w = (params.finger_width_px - 1) as f64 / 2.0;
    for su in [-half, half] {
        for sv in [-half_w, half_w] {
            let p = c + u * su + v * sv;
            if p.x < -BOUNDS_SLACK || p.y < -BOUNDS_SLACK || p.x > xmax || p.y > ymax {
                return Err(Error::RectangleOutOfBounds);
            }
        }
    }

    let threshold = depth.get(center.x as usize, center.y as usize) + params.hct;
    let dists = params.sample_distances(opening_px);
    let rows = params.row_offsets();
    let mut valid = 0usize;
    for side in [-1.0, 1.0] {
        for &d in &dists {
            for &r in &rows {
                let p = c + u * (side * d) + v * r;
                if depth.bilinear(p.x, p.y) >= threshold {
                    valid += 1;
                }
            }
        }
    }
    Ok(valid as f64 / (2 * dists.len() * rows.len()) as f64)
}
