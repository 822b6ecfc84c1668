//! Feature-congestion clutter map.
//!
//! Each pixel's clutter is the local variability of three feature families
//! computed on the Lab image: luminance contrast (difference of Gaussians on
//! L), color (the a and b planes) and orientation (four oriented derivative
//! of Gaussian responses on L). Local variability is the Gaussian-windowed
//! variance `G(f²) − G(f)²`; the map is a weighted sum of the per-feature
//! standard deviations.

pub mod filter;
pub mod lab;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{write_pgm16, Grid, Pixel, RgbImage};
use filter::{gaussian_blur, gaussian_gradient};
pub use lab::{rgb_to_lab, srgb_to_lab, LabImage};

pub const MIN_IMAGE_SIDE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FcmParams {
    /// Inner and outer DoG scales, px.
    pub dog_sigmas: (f64, f64),
    /// Scale of the oriented derivative filters, px.
    pub orient_sigma: f64,
    /// Scale of the variance window, px.
    pub window_sigma: f64,
    pub w_color: f64,
    pub w_orient: f64,
    /// Multipliers applied to each feature's standard deviation.
    pub norm_contrast: f64,
    pub norm_color: f64,
    pub norm_orient: f64,
}

impl Default for FcmParams {
    fn default() -> Self {
        Self {
            dog_sigmas: (2.0, 3.2),
            orient_sigma: 2.0,
            window_sigma: 5.0,
            w_color: 0.3,
            w_orient: 1.0,
            norm_contrast: 1.0 / 25.0,
            norm_color: 1.0 / 60.0,
            norm_orient: 1.0 / 25.0,
        }
    }
}

/// Per-pixel clutter, same resolution as the source image.
#[derive(Debug, Clone, PartialEq)]
pub struct ClutterMap {
    pub values: Grid<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterScores {
    pub global: f64,
    /// `(pose index, local score)` pairs.
    pub per_pose_local: Vec<(usize, f64)>,
}

/// Gaussian-windowed local variance of a feature plane, clamped at zero.
///
/// The plane is shifted by its mean first (variance is shift invariant) and
/// results inside the floating-point noise floor of `G(f²)` are zeroed, so
/// flat regions come out exactly 0.
fn local_variance(feature: &Grid<f64>, sigma: f64) -> Grid<f64> {
    let mean = feature.mean();
    let centered = feature.map(|v| v - mean);
    let sq = centered.map(|v| v * v);
    let m1 = gaussian_blur(&centered, sigma);
    let m2 = gaussian_blur(&sq, sigma);
    let floor = 64.0 * f64::EPSILON;
    Grid::from_vec(
        m1.width(),
        m1.height(),
        m1.data()
            .iter()
            .zip(m2.data())
            .map(|(&a, &b)| {
                let v = b - a * a;
                if v <= floor * b {
                    0.0
                } else {
                    v
                }
            })
            .collect(),
    )
    .expect("same shape")
}

pub fn compute_clutter_map(image: &RgbImage, params: &FcmParams) -> Result<ClutterMap> {
    let (w, h) = image.dims();
    if w < MIN_IMAGE_SIDE || h < MIN_IMAGE_SIDE {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: MIN_IMAGE_SIDE,
        });
    }
    let [l, a, b] = rgb_to_lab(image);
    let win = params.window_sigma;

    let fine = gaussian_blur(&l, params.dog_sigmas.0);
    let coarse = gaussian_blur(&l, params.dog_sigmas.1);
    let contrast = Grid::from_vec(w, h, fine.data().iter().zip(coarse.data()).map(|(f, c)| f - c).collect())?;
    let var_contrast = local_variance(&contrast, win);

    let var_a = local_variance(&a, win);
    let var_b = local_variance(&b, win);

    let (dx, dy) = gaussian_gradient(&l, params.orient_sigma);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let combine = |cx: f64, cy: f64| -> Grid<f64> {
        let data = dx.data().iter().zip(dy.data()).map(|(x, y)| cx * x + cy * y).collect();
        Grid::from_vec(w, h, data).expect("same shape")
    };
    // 0°, 90°, 45°, 135°
    let var_orient = [
        local_variance(&dx, win),
        local_variance(&dy, win),
        local_variance(&combine(s, s), win),
        local_variance(&combine(-s, s), win),
    ];

    let w_o = params.w_orient / 4.0;
    let values = Grid::from_fn(w, h, |x, y| {
        let i = y * w + x;
        let c = var_contrast.data()[i].sqrt() * params.norm_contrast;
        let col = (var_a.data()[i] + var_b.data()[i]).sqrt() * params.norm_color;
        let ori: f64 = var_orient.iter().map(|v| v.data()[i].sqrt()).sum::<f64>() * params.norm_orient;
        c + params.w_color * col + w_o * ori
    });
    Ok(ClutterMap { values })
}

/// Mean clutter over the whole image.
pub fn global_score(map: &ClutterMap) -> f64 {
    map.values.mean()
}

/// Mean clutter over the disc of diameter `opening_px` around `center`,
/// clipped to the image.
pub fn local_score(map: &ClutterMap, center: Pixel, opening_px: f64) -> Result<f64> {
    let v = &map.values;
    if !v.contains(center) {
        return Err(Error::OutOfBounds(center));
    }
    let r = opening_px / 2.0;
    let r2 = r * r;
    let ri = r.floor() as i64;
    let (mut sum, mut count) = (0.0, 0usize);
    for dy in -ri..=ri {
        for dx in -ri..=ri {
            if (dx * dx + dy * dy) as f64 > r2 {
                continue;
            }
            if let Some(val) = v.at(Pixel::new(center.x + dx, center.y + dy)) {
                sum += val;
                count += 1;
            }
        }
    }
    Ok(sum / count as f64)
}

pub fn score(map: &ClutterMap, centers: &[Pixel], opening_px: f64) -> Result<ClutterScores> {
    let per_pose_local = centers
        .iter()
        .enumerate()
        .map(|(i, &c)| local_score(map, c, opening_px).map(|s| (i, s)))
        .collect::<Result<_>>()?;
    Ok(ClutterScores {
        global: global_score(map),
        per_pose_local,
    })
}

/// Sidecar metadata written next to an exported clutter map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterExport {
    /// Multiplier from clutter units to the stored 16-bit values.
    pub scale: f64,
    pub min: f64,
    pub max: f64,
    pub global_score: f64,
}

/// Writes the map as a 16-bit PGM scaled so the maximum maps to 65535, and
/// returns the sidecar describing the scaling.
pub fn export_clutter_map<W: Write>(map: &ClutterMap, out: &mut W) -> Result<ClutterExport> {
    let (min, max) = map.values.min_max();
    let scale = if max > 0.0 { 65535.0 / max } else { 1.0 };
    let img = map.values.map(|&v| (v * scale).round().clamp(0.0, 65535.0) as u16);
    write_pgm16(out, &img)?;
    Ok(ClutterExport {
        scale,
        min,
        max,
        global_score: global_score(map),
    })
}
