//! Deterministic top-down tabletop simulator.
//!
//! Objects are rigid convex prisms (polygon or circle footprint with a flat
//! top at some height). The camera looks straight down, so rendering reduces
//! to rasterizing footprints and keeping the tallest one per pixel.

mod contact;
mod gripper;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{is_convex_ccw, penetration, polygon_centroid, Footprint, Rect, Vec2};
use crate::image::{DepthImage, Grid, Pixel, RgbImage};

pub use contact::{apply_push, PushEvents, PushStroke};
pub use gripper::{attempt_grasp, execution_error, grasp_at, FailureReason, GraspOutcome};

/// Allowed pairwise footprint overlap after any action, in meters.
pub const PENETRATION_TOLERANCE: f64 = 1e-4;

/// Object footprint in the object's local frame (centroid at the origin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Polygon { vertices: Vec<Vec2> },
    Circle { radius: f64 },
}

impl Shape {
    /// Builds a polygon shape, re-centering the vertices on their centroid.
    pub fn polygon(vertices: Vec<Vec2>) -> Result<Self> {
        if !is_convex_ccw(&vertices) {
            return Err(Error::Config("polygon must be convex and counter-clockwise".into()));
        }
        let c = polygon_centroid(&vertices);
        Ok(Shape::Polygon {
            vertices: vertices.into_iter().map(|v| v - c).collect(),
        })
    }

    pub fn rect(w: f64, h: f64) -> Self {
        let (a, b) = (w / 2.0, h / 2.0);
        Shape::Polygon {
            vertices: vec![Vec2::new(-a, -b), Vec2::new(a, -b), Vec2::new(a, b), Vec2::new(-a, b)],
        }
    }

    /// Radius of the smallest origin-centered circle containing the shape.
    pub fn circumradius(&self) -> f64 {
        match self {
            Shape::Polygon { vertices } => vertices.iter().map(|v| v.norm()).fold(0.0, f64::max),
            Shape::Circle { radius } => *radius,
        }
    }

    /// Smallest width over all directions (the narrowest grasp).
    pub fn min_width(&self) -> f64 {
        match self {
            Shape::Circle { radius } => 2.0 * radius,
            Shape::Polygon { vertices } => {
                let fp = Footprint::Polygon(vertices.clone());
                let n = vertices.len();
                (0..n)
                    .map(|i| {
                        let e = vertices[(i + 1) % n] - vertices[i];
                        let (lo, hi) = fp.project(e.perp().normalized());
                        hi - lo
                    })
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn is_valid(&self) -> bool {
        match self {
            Shape::Polygon { vertices } => is_convex_ccw(vertices),
            Shape::Circle { radius } => *radius > 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: u32,
    pub shape: Shape,
    pub pose: Pose,
    /// Top surface above the table, meters.
    pub height: f64,
    pub color: [f64; 3],
}

impl SceneObject {
    pub fn footprint(&self) -> Footprint {
        let p = self.pose.position();
        match &self.shape {
            Shape::Polygon { vertices } => {
                Footprint::Polygon(vertices.iter().map(|v| v.rotated(self.pose.yaw) + p).collect())
            }
            Shape::Circle { radius } => Footprint::Circle { center: p, radius: *radius },
        }
    }

    pub fn translate(&mut self, d: Vec2) {
        self.pose.x += d.x;
        self.pose.y += d.y;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub workspace: Rect,
    /// Camera-to-table distance, meters.
    pub table_depth: f64,
    pub objects: Vec<SceneObject>,
    #[serde(default)]
    pub rng_seed: u64,
}

impl Scene {
    pub fn empty(workspace: Rect, table_depth: f64) -> Self {
        Self {
            workspace,
            table_depth,
            objects: Vec::new(),
            rng_seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Checks the structural invariants of a scene: valid shapes, positive
    /// heights, footprints inside the workspace and pairwise overlap within
    /// [`PENETRATION_TOLERANCE`].
    pub fn validate(&self) -> Result<()> {
        if !(0.50..=0.70).contains(&self.table_depth) {
            return Err(Error::Config(format!("table_depth {} outside [0.50, 0.70]", self.table_depth)));
        }
        let fps: Vec<Footprint> = self.objects.iter().map(SceneObject::footprint).collect();
        for (o, fp) in self.objects.iter().zip(&fps) {
            if !(o.height > 0.0) || !o.shape.is_valid() {
                return Err(Error::Config(format!("object {} has invalid shape or height", o.id)));
            }
            if !self.workspace.contains(fp.centroid()) {
                return Err(Error::Config(format!("object {} left the workspace", o.id)));
            }
        }
        for i in 0..fps.len() {
            for j in i + 1..fps.len() {
                if let Some((_, d)) = penetration(&fps[i], &fps[j]) {
                    if d > PENETRATION_TOLERANCE {
                        return Err(Error::Config(format!(
                            "objects {} and {} overlap by {d:.2e} m",
                            self.objects[i].id, self.objects[j].id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Two-finger parallel gripper geometry, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GripperParams {
    pub opening: f64,
    /// Width of the closed gripper; also the push corridor width.
    pub finger_span: f64,
    /// Finger cross-section across the closing axis.
    pub finger_width: f64,
    /// Finger cross-section along the closing axis.
    pub finger_thickness: f64,
    pub insert_depth: f64,
    pub grip_margin: f64,
    /// Largest distance between the closing line and the gripped load's
    /// centroid that still holds, m.
    pub max_grip_offset: f64,
    /// Standard deviation of the executed grasp center about the commanded
    /// one, per axis, m.
    pub position_noise: f64,
    /// Standard deviation of the executed closing angle, rad.
    pub angle_noise: f64,
}

impl Default for GripperParams {
    fn default() -> Self {
        Self {
            opening: 0.10,
            finger_span: 0.02,
            finger_width: 0.01,
            finger_thickness: 0.01,
            insert_depth: 0.02,
            grip_margin: 0.005,
            max_grip_offset: 0.02,
            position_noise: 0.002,
            angle_noise: 0.05,
        }
    }
}

/// Orthographic overhead camera: pixel `(x, y)` has its center at
/// `origin + ((x + 0.5) / scale, (y + 0.5) / scale)` in the workspace frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub width: usize,
    pub height: usize,
    /// Pixels per meter.
    pub scale: f64,
    pub origin: Vec2,
}

impl CameraModel {
    /// Camera whose image exactly covers `workspace` at `scale` px/m.
    pub fn covering(workspace: &Rect, scale: f64) -> Self {
        Self {
            width: (workspace.width() * scale).round() as usize,
            height: (workspace.height() * scale).round() as usize,
            scale,
            origin: workspace.min,
        }
    }

    pub fn pixel_center(&self, x: f64, y: f64) -> Vec2 {
        Vec2::new(
            self.origin.x + (x + 0.5) / self.scale,
            self.origin.y + (y + 0.5) / self.scale,
        )
    }

    pub fn pixel_to_world(&self, p: Pixel) -> Vec2 {
        self.pixel_center(p.x as f64, p.y as f64)
    }

    /// Continuous pixel coordinates of a workspace point.
    pub fn world_to_image(&self, p: Vec2) -> (f64, f64) {
        (
            (p.x - self.origin.x) * self.scale - 0.5,
            (p.y - self.origin.y) * self.scale - 0.5,
        )
    }

    pub fn world_to_pixel(&self, p: Vec2) -> Pixel {
        let (x, y) = self.world_to_image(p);
        Pixel::new(x.round() as i64, y.round() as i64)
    }

    pub fn meters_to_px(&self, m: f64) -> f64 {
        m * self.scale
    }

    pub fn covers(&self, ws: &Rect) -> bool {
        let lo = self.pixel_center(-0.5, -0.5);
        let hi = self.pixel_center(self.width as f64 - 0.5, self.height as f64 - 0.5);
        lo.x <= ws.min.x + 1e-9 && lo.y <= ws.min.y + 1e-9 && hi.x >= ws.max.x - 1e-9 && hi.y >= ws.max.y - 1e-9
    }
}

/// A catalog entry: a footprint template with a fixed height and color.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeTemplate {
    pub name: String,
    pub shape: Shape,
    pub height: f64,
    pub color: [f64; 3],
}

pub type Catalog = Vec<ShapeTemplate>;

/// Eight household-goods proxies: boxes, cylinders, a triangle and convex
/// prisms, 2–7 cm tall with distinct colors.
pub fn default_catalog() -> Catalog {
    let t = |name: &str, shape: Shape, height: f64, color: [f64; 3]| ShapeTemplate {
        name: name.into(),
        shape,
        height,
        color,
    };
    let tri = {
        let s = 0.06;
        let h = s * 3f64.sqrt() / 2.0;
        Shape::polygon(vec![Vec2::new(0.0, 0.0), Vec2::new(s, 0.0), Vec2::new(s / 2.0, h)]).unwrap()
    };
    let hexagon = Shape::polygon(
        (0..6)
            .map(|i| Vec2::from_angle(i as f64 * std::f64::consts::PI / 3.0) * 0.022)
            .collect(),
    )
    .unwrap();
    vec![
        t("box_small", Shape::rect(0.03, 0.04), 0.05, [0.85, 0.15, 0.15]),
        t("box_long", Shape::rect(0.03, 0.08), 0.03, [0.15, 0.35, 0.85]),
        t("box_square", Shape::rect(0.05, 0.05), 0.07, [0.95, 0.80, 0.10]),
        t("can", Shape::Circle { radius: 0.02 }, 0.06, [0.15, 0.70, 0.25]),
        t("cylinder_thin", Shape::Circle { radius: 0.01 }, 0.04, [0.90, 0.45, 0.05]),
        t("tub", Shape::Circle { radius: 0.03 }, 0.03, [0.60, 0.20, 0.75]),
        t("triangle", tri, 0.02, [0.05, 0.75, 0.80]),
        t("hex_prism", hexagon, 0.045, [0.95, 0.95, 0.95]),
    ]
}

/// Places `n` objects as a contiguous heap around the workspace center by
/// rejection sampling. Each new object picks a placed anchor and a direction
/// and slides outward from the anchor in 1 mm steps until it fits, so it comes
/// to rest against the heap. Every rejected step counts against the budget;
/// a slide longer than 1.5× the larger of the two diameters restarts with a
/// new anchor.
pub fn spawn_heap(seed: u64, n: usize, catalog: &[ShapeTemplate], workspace: Rect, table_depth: f64) -> Result<Scene> {
    const MAX_REJECTIONS: usize = 10_000;
    const SLIDE_STEP: f64 = 0.001;
    if !(1..=20).contains(&n) {
        return Err(Error::Config(format!("heap size {n} outside 1..=20")));
    }
    if catalog.is_empty() {
        return Err(Error::Config("empty catalog".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scene = Scene::empty(workspace, table_depth);
    scene.rng_seed = seed;
    let mut placed: Vec<Footprint> = Vec::with_capacity(n);
    let mut diameters: Vec<f64> = Vec::with_capacity(n);

    for id in 0..n {
        let tpl = &catalog[rng.gen_range(0..catalog.len())];
        let yaw = rng.gen_range(0.0..std::f64::consts::TAU);
        let diameter = 2.0 * tpl.shape.circumradius();
        let make = |pos: Vec2| SceneObject {
            id: id as u32,
            shape: tpl.shape.clone(),
            pose: Pose { x: pos.x, y: pos.y, yaw },
            height: tpl.height,
            color: tpl.color,
        };
        let fits = |fp: &Footprint| workspace.contains_rect(&fp.bounds()) && placed.iter().all(|o| penetration(o, fp).is_none());
        // the rejection budget is per object
        let mut rejections = 0;
        let obj = if placed.is_empty() {
            make(workspace.center())
        } else {
            'search: loop {
                let a = rng.gen_range(0..placed.len());
                let anchor = placed[a].centroid();
                let dir = Vec2::from_angle(rng.gen_range(0.0..std::f64::consts::TAU));
                // a small object could never clear a large anchor otherwise
                let reach = 1.5 * diameter.max(diameters[a]);
                let gap = rng.gen_range(0.0..SETTLE_GAP);
                let mut dist = 0.0;
                while dist < reach {
                    let obj = make(anchor + dir * dist);
                    if fits(&obj.footprint()) {
                        let settled = make(anchor + dir * (dist + gap));
                        if dist + gap < reach && fits(&settled.footprint()) {
                            break 'search settled;
                        }
                        break 'search obj;
                    }
                    rejections += 1;
                    if rejections >= MAX_REJECTIONS {
                        return Err(Error::PlacementFailure { attempts: rejections });
                    }
                    dist += SLIDE_STEP;
                }
            }
        };
        placed.push(obj.footprint());
        diameters.push(diameter);
        scene.objects.push(obj);
    }
    Ok(scene)
}


/// Upper bound of the random gap left after an object slides into contact, m.
const SETTLE_GAP: f64 = 0.01;

pub const TABLE_COLOR: [f64; 3] = [0.62, 0.52, 0.40];

/// Renders the overhead RGB and depth images.
pub fn render(scene: &Scene, cam: &CameraModel) -> (RgbImage, DepthImage) {
    let mut rgb = Grid::filled(cam.width, cam.height, TABLE_COLOR);
    let mut depth = Grid::filled(cam.width, cam.height, scene.table_depth);
    let mut top = Grid::filled(cam.width, cam.height, 0.0f64);

    let mut order: Vec<&SceneObject> = scene.objects.iter().collect();
    order.sort_by(|a, b| a.height.total_cmp(&b.height).then(a.id.cmp(&b.id)));
    for obj in order {
        let fp = obj.footprint();
        let b = fp.bounds();
        let (x0, y0) = cam.world_to_image(b.min);
        let (x1, y1) = cam.world_to_image(b.max);
        let (wmax, hmax) = (cam.width as f64 - 1.0, cam.height as f64 - 1.0);
        if x1 < 0.0 || y1 < 0.0 || x0 > wmax || y0 > hmax {
            continue;
        }
        let xs = (x0.floor().max(0.0) as usize)..=(x1.ceil().min(wmax) as usize);
        let ys = (y0.floor().max(0.0) as usize)..=(y1.ceil().min(hmax) as usize);
        for y in ys {
            for x in xs.clone() {
                if fp.contains(cam.pixel_center(x as f64, y as f64)) && obj.height >= *top.get(x, y) {
                    *top.get_mut(x, y) = obj.height;
                    *depth.get_mut(x, y) = scene.table_depth - obj.height;
                    *rgb.get_mut(x, y) = obj.color;
                }
            }
        }
    }
    (rgb, depth)
}

/// [`render`] with additive Gaussian depth noise (standard deviation in
/// meters). A zero deviation returns the noiseless image.
pub fn render_with_depth_noise(scene: &Scene, cam: &CameraModel, noise_std: f64, seed: u64) -> (RgbImage, DepthImage) {
    let (rgb, mut depth) = render(scene, cam);
    if noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_std).expect("positive deviation");
        for d in depth.data_mut() {
            *d += normal.sample(&mut rng);
        }
    }
    (rgb, depth)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ws() -> Rect {
        Rect::new(Vec2::ZERO, Vec2::new(0.45, 0.45))
    }

    fn single(shape: Shape, at: Vec2, height: f64) -> Scene {
        let mut s = Scene::empty(ws(), 0.65);
        s.objects.push(SceneObject {
            id: 0,
            shape,
            pose: Pose { x: at.x, y: at.y, yaw: 0.0 },
            height,
            color: [1.0, 0.0, 0.0],
        });
        s
    }

    #[test]
    fn heap_has_n_valid_objects_and_is_deterministic() {
        let a = spawn_heap(7, 20, &default_catalog(), ws(), 0.65).unwrap();
        assert_eq!(a.len(), 20);
        a.validate().unwrap();
        let b = spawn_heap(7, 20, &default_catalog(), ws(), 0.65).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn single_object_heap_starts_at_center() {
        let s = spawn_heap(3, 1, &default_catalog(), ws(), 0.65).unwrap();
        let c = s.objects[0].footprint().centroid();
        assert!((c - ws().center()).norm() < 0.1);
    }

    #[test]
    fn heap_rejects_bad_sizes() {
        assert!(spawn_heap(1, 0, &default_catalog(), ws(), 0.65).is_err());
        assert!(spawn_heap(1, 21, &default_catalog(), ws(), 0.65).is_err());
        assert!(spawn_heap(1, 3, &[], ws(), 0.65).is_err());
    }

    #[test]
    fn tiny_workspace_exhausts_rejections() {
        let tiny = Rect::new(Vec2::ZERO, Vec2::new(0.12, 0.12));
        let err = spawn_heap(1, 20, &default_catalog(), tiny, 0.65).unwrap_err();
        assert!(matches!(err, Error::PlacementFailure { .. }));
    }

    #[test]
    fn empty_scene_renders_table() {
        let s = Scene::empty(ws(), 0.65);
        let cam = CameraModel::covering(&ws(), 400.0);
        let (rgb, depth) = render(&s, &cam);
        assert!(depth.data().iter().all(|&d| d == 0.65));
        assert!(rgb.data().iter().all(|&c| c == TABLE_COLOR));
    }

    #[test]
    fn object_footprint_reads_table_minus_height() {
        let s = single(Shape::rect(0.04, 0.04), Vec2::new(0.2, 0.2), 0.05);
        let cam = CameraModel::covering(&ws(), 400.0);
        let (rgb, depth) = render(&s, &cam);
        let p = cam.world_to_pixel(Vec2::new(0.2, 0.2));
        assert!((*depth.get(p.x as usize, p.y as usize) - 0.60).abs() < 1e-12);
        assert_eq!(*rgb.get(p.x as usize, p.y as usize), [1.0, 0.0, 0.0]);
        // 0.04 m at 400 px/m covers 16x16 pixel centers
        let covered = depth.data().iter().filter(|&&d| d < 0.65).count();
        assert_eq!(covered, 256);
    }

    #[test]
    fn taller_object_wins_overlap() {
        let mut s = single(Shape::rect(0.04, 0.04), Vec2::new(0.2, 0.2), 0.03);
        s.objects.push(SceneObject {
            id: 1,
            shape: Shape::rect(0.04, 0.04),
            pose: Pose { x: 0.21, y: 0.2, yaw: 0.0 },
            height: 0.06,
            color: [0.0, 0.0, 1.0],
        });
        let cam = CameraModel::covering(&ws(), 400.0);
        let (rgb, depth) = render(&s, &cam);
        let p = cam.world_to_pixel(Vec2::new(0.205, 0.2));
        assert!((*depth.get(p.x as usize, p.y as usize) - 0.59).abs() < 1e-12);
        assert_eq!(*rgb.get(p.x as usize, p.y as usize), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn camera_round_trip_under_half_pixel() {
        let cam = CameraModel::covering(&ws(), 400.0);
        assert!(cam.covers(&ws()));
        for &(x, y) in &[(0.0, 0.0), (17.0, 93.0), (179.0, 179.0)] {
            let w = cam.pixel_center(x, y);
            let (bx, by) = cam.world_to_image(w);
            assert!((bx - x).abs() < 0.5 && (by - y).abs() < 0.5);
        }
    }

    #[test]
    fn catalog_has_eight_valid_templates() {
        let c = default_catalog();
        assert_eq!(c.len(), 8);
        for t in &c {
            assert!(t.shape.is_valid(), "{}", t.name);
            assert!((0.02..=0.07).contains(&t.height), "{}", t.name);
        }
    }

    #[test]
    fn scene_json_round_trip() {
        let s = spawn_heap(11, 6, &default_catalog(), ws(), 0.65).unwrap();
        let back = Scene::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn depth_noise_hook_defaults_off() {
        let s = spawn_heap(2, 4, &default_catalog(), ws(), 0.65).unwrap();
        let cam = CameraModel::covering(&ws(), 400.0);
        assert_eq!(render_with_depth_noise(&s, &cam, 0.0, 9), render(&s, &cam));
        let (_, noisy) = render_with_depth_noise(&s, &cam, 0.001, 9);
        assert_ne!(noisy, render(&s, &cam).1);
    }
}
