//! Push-to-move planning.
//!
//! The push ends at the freest point of the workspace, the maximum of the
//! Euclidean distance transform with objects and the workspace border as
//! obstacles. The start is found by walking backwards from the cluttered
//! region along the push line until the gripper can descend onto free table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::image::{BinaryMask, DepthImage, Grid, Pixel};
use crate::simscene::{CameraModel, PushStroke};

/// Gripper tip sits this far above the probed surface during the sweep, m.
pub const PROBE_MARGIN: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushAction {
    pub start: Pixel,
    pub end: Pixel,
    /// Depth of the gripper tip during the sweep, m.
    pub entry_depth: f64,
}

/// JSON form `{start: [x, y], end: [x, y], entry_depth}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushActionRecord {
    pub start: [i64; 2],
    pub end: [i64; 2],
    pub entry_depth: f64,
}

impl From<&PushAction> for PushActionRecord {
    fn from(a: &PushAction) -> Self {
        Self {
            start: [a.start.x, a.start.y],
            end: [a.end.x, a.end.y],
            entry_depth: a.entry_depth,
        }
    }
}

impl From<PushActionRecord> for PushAction {
    fn from(r: PushActionRecord) -> Self {
        Self {
            start: Pixel::new(r.start[0], r.start[1]),
            end: Pixel::new(r.end[0], r.end[1]),
            entry_depth: r.entry_depth,
        }
    }
}

impl PushAction {
    pub fn to_stroke(&self, cam: &CameraModel) -> PushStroke {
        PushStroke {
            start: cam.pixel_to_world(self.start),
            end: cam.pixel_to_world(self.end),
        }
    }
}

/// Euclidean distance to the nearest obstacle, px.
pub type DistanceField = Grid<f64>;

/// One-dimensional squared distance transform of a sampled function
/// (lower envelope of parabolas rooted at each sample).
fn edt_1d(f: &[i64], out: &mut [i64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let sep = |p: usize| ((f[q] + (q * q) as i64) - (f[p] + (p * p) as i64)) as f64 / (2 * (q - p)) as f64;
        let mut s = sep(v[k]);
        // z[0] is -inf, so this stops at k = 0 at the latest
        while s <= z[k] {
            k -= 1;
            s = sep(v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as i64 - v[k] as i64;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared Euclidean distance to the nearest obstacle, where obstacles
/// are the set pixels of `mask` plus a virtual one-pixel ring just outside
/// the image.
pub fn squared_distance_transform(mask: &BinaryMask) -> Grid<i64> {
    let (w, h) = mask.dims();
    // Columns first. With the ring at rows -1 and h every column has an
    // obstacle, so a two-sweep nearest-obstacle scan is exact here.
    let mut col = Grid::filled(w, h, 0i64);
    for x in 0..w {
        let mut last: i64 = -1;
        for y in 0..h {
            if *mask.get(x, y) {
                last = y as i64;
            }
            *col.get_mut(x, y) = y as i64 - last;
        }
        let mut next: i64 = h as i64;
        for y in (0..h).rev() {
            if *mask.get(x, y) {
                next = y as i64;
            }
            let d = (*col.get(x, y)).min(next - y as i64);
            *col.get_mut(x, y) = d * d;
        }
    }
    // Rows, over the extended index range [-1, w] whose ends are ring pixels.
    let n = w + 2;
    let mut f = vec![0i64; n];
    let mut out_row = vec![0i64; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0f64; n + 1];
    let mut out = Grid::filled(w, h, 0i64);
    for y in 0..h {
        f[0] = 0;
        f[n - 1] = 0;
        for x in 0..w {
            f[x + 1] = *col.get(x, y);
        }
        edt_1d(&f, &mut out_row, &mut v, &mut z);
        for x in 0..w {
            *out.get_mut(x, y) = out_row[x + 1];
        }
    }
    out
}

pub fn distance_transform(mask: &BinaryMask) -> DistanceField {
    squared_distance_transform(mask).map(|&d| (d as f64).sqrt())
}

/// Pixel with the largest distance; the smallest row-major index wins ties.
pub fn freest_point(field: &DistanceField) -> Pixel {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, &v) in field.data().iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    Pixel::new((best.0 % field.width()) as i64, (best.0 / field.width()) as i64)
}

/// Integer pixel near `p` with the smallest perpendicular distance to the
/// line through `origin` along the unit `dir` (at most half a pixel). Ties
/// go to the pixel closest to `p`.
fn snap_to_line(p: Vec2, origin: Vec2, dir: Vec2) -> Pixel {
    let normal = dir.perp();
    let (fx, fy) = (p.x.floor(), p.y.floor());
    let mut best = (f64::INFINITY, f64::INFINITY, Pixel::new(fx as i64, fy as i64));
    for (cx, cy) in [(fx, fy), (fx + 1.0, fy), (fx, fy + 1.0), (fx + 1.0, fy + 1.0)] {
        let c = Vec2::new(cx, cy);
        let perp = (c - origin).dot(normal).abs();
        let near = (c - p).norm_sq();
        if perp < best.0 - 1e-12 || ((perp - best.0).abs() <= 1e-12 && near < best.1) {
            best = (perp, near, Pixel::new(cx as i64, cy as i64));
        }
    }
    best.2
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PushParams {
    /// Required depth gain over the selected center before the gripper may
    /// enter, m.
    pub entry_delta: f64,
    /// Walk increment, px.
    pub step_px: f64,
}

impl Default for PushParams {
    fn default() -> Self {
        Self {
            entry_delta: 0.02,
            step_px: 2.0,
        }
    }
}

/// Walks back from `selected_center`, away from `end`, for the first probe
/// deep enough to enter.
pub fn find_push_start(
    depth: &DepthImage,
    selected_center: Pixel,
    end: Pixel,
    params: &PushParams,
) -> Result<PushAction> {
    if !(params.step_px > 0.0) {
        return Err(Error::Config("step_px must be positive".into()));
    }
    if end == selected_center || !depth.contains(selected_center) {
        return Err(Error::NoEntryPoint);
    }
    let origin = Vec2::new(selected_center.x as f64, selected_center.y as f64);
    let dir = (Vec2::new(end.x as f64, end.y as f64) - origin).normalized();
    let need = depth.get(selected_center.x as usize, selected_center.y as usize) + params.entry_delta;
    let mut last = selected_center;
    for i in 1.. {
        let probe = snap_to_line(origin - dir * (i as f64 * params.step_px), origin, dir);
        let Some(&d) = depth.at(probe) else {
            return Err(Error::NoEntryPoint);
        };
        if probe != last && probe != selected_center && d >= need {
            return Ok(PushAction {
                start: probe,
                end,
                entry_depth: d - PROBE_MARGIN,
            });
        }
        last = probe;
    }
    unreachable!()
}

/// Plans a push from the cluttered region around `selected_center` towards
/// the freest point of `mask`.
pub fn plan_push(depth: &DepthImage, mask: &BinaryMask, selected_center: Pixel, params: &PushParams) -> Result<PushAction> {
    let end = freest_point(&distance_transform(mask));
    find_push_start(depth, selected_center, end, params)
}

/// Last-resort push: enter from the free border pixel closest to
/// `selected_center` and sweep towards the freest point.
pub fn plan_boundary_push(depth: &DepthImage, mask: &BinaryMask, selected_center: Pixel, params: &PushParams) -> Result<PushAction> {
    if !depth.contains(selected_center) {
        return Err(Error::NoEntryPoint);
    }
    let end = freest_point(&distance_transform(mask));
    let need = depth.get(selected_center.x as usize, selected_center.y as usize) + params.entry_delta;
    let (w, h) = (depth.width() as i64, depth.height() as i64);
    let inset = 2.min(w / 2).min(h / 2);
    let mut border = Vec::new();
    for x in inset..w - inset {
        border.push(Pixel::new(x, inset));
        border.push(Pixel::new(x, h - 1 - inset));
    }
    for y in inset + 1..h - 1 - inset {
        border.push(Pixel::new(inset, y));
        border.push(Pixel::new(w - 1 - inset, y));
    }
    border.sort_by_key(|p| {
        let (dx, dy) = (p.x - selected_center.x, p.y - selected_center.y);
        (dx * dx + dy * dy, p.y, p.x)
    });
    border
        .into_iter()
        .find(|&p| p != end && depth.at(p).is_some_and(|&d| d >= need))
        .map(|start| PushAction {
            start,
            end,
            entry_depth: depth.get(start.x as usize, start.y as usize) - PROBE_MARGIN,
        })
        .ok_or(Error::NoEntryPoint)
}
