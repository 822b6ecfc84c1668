//! Planar convex geometry: footprints, separating-axis tests and the
//! translations used by the contact resolver.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians. Components within 1e-12 of an integer
    /// are snapped so axis-aligned directions are exact.
    pub fn from_angle(angle: f64) -> Self {
        let snap = |v: f64| {
            let r = v.round();
            if (v - r).abs() < 1e-12 {
                r
            } else {
                v
            }
        };
        Self::new(snap(angle.cos()), snap(angle.sin()))
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Counter-clockwise perpendicular.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn rotated(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn contains_rect(&self, o: &Rect) -> bool {
        o.min.x >= self.min.x && o.max.x <= self.max.x && o.min.y >= self.min.y && o.max.y <= self.max.y
    }
}

/// A convex footprint placed in the workspace frame.
#[derive(Debug, Clone, PartialEq)]
pub enum Footprint {
    /// Counter-clockwise convex polygon.
    Polygon(Vec<Vec2>),
    Circle { center: Vec2, radius: f64 },
}

impl Footprint {
    /// Interval covered by the footprint when projected onto `axis`.
    pub fn project(&self, axis: Vec2) -> (f64, f64) {
        match self {
            Footprint::Polygon(vs) => vs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                let p = v.dot(axis);
                (lo.min(p), hi.max(p))
            }),
            Footprint::Circle { center, radius } => {
                let c = center.dot(axis);
                let r = radius * axis.norm();
                (c - r, c + r)
            }
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        match self {
            Footprint::Polygon(vs) => {
                let n = vs.len();
                (0..n).all(|i| {
                    let a = vs[i];
                    let b = vs[(i + 1) % n];
                    (b - a).cross(p - a) >= 0.0
                })
            }
            Footprint::Circle { center, radius } => (p - *center).norm_sq() <= radius * radius,
        }
    }

    pub fn bounds(&self) -> Rect {
        let (x0, x1) = self.project(Vec2::new(1.0, 0.0));
        let (y0, y1) = self.project(Vec2::new(0.0, 1.0));
        Rect::new(Vec2::new(x0, y0), Vec2::new(x1, y1))
    }

    pub fn centroid(&self) -> Vec2 {
        match self {
            Footprint::Polygon(vs) => polygon_centroid(vs),
            Footprint::Circle { center, .. } => *center,
        }
    }

    pub fn translated(&self, d: Vec2) -> Footprint {
        match self {
            Footprint::Polygon(vs) => Footprint::Polygon(vs.iter().map(|&v| v + d).collect()),
            Footprint::Circle { center, radius } => Footprint::Circle {
                center: *center + d,
                radius: *radius,
            },
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            Footprint::Polygon(vs) => polygon_area(vs),
            Footprint::Circle { radius, .. } => std::f64::consts::PI * radius * radius,
        }
    }

    /// Parameter interval `[s0, s1] ⊆ [t0, t1]` where the line `origin + s·dir`
    /// lies inside the footprint, if any.
    pub fn clip_line(&self, origin: Vec2, dir: Vec2, t0: f64, t1: f64) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = (t0, t1);
        match self {
            Footprint::Polygon(vs) => {
                let n = vs.len();
                for i in 0..n {
                    let a = vs[i];
                    let edge = vs[(i + 1) % n] - a;
                    // inside iff edge × (p - a) >= 0
                    let c0 = edge.cross(origin - a);
                    let c1 = edge.cross(dir);
                    if c1.abs() < 1e-15 {
                        if c0 < 0.0 {
                            return None;
                        }
                    } else {
                        let s = -c0 / c1;
                        if c1 > 0.0 {
                            lo = lo.max(s);
                        } else {
                            hi = hi.min(s);
                        }
                    }
                }
            }
            Footprint::Circle { center, radius } => {
                let f = origin - *center;
                let a = dir.norm_sq();
                let b = 2.0 * f.dot(dir);
                let c = f.norm_sq() - radius * radius;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                lo = lo.max((-b - sq) / (2.0 * a));
                hi = hi.min((-b + sq) / (2.0 * a));
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

pub fn polygon_area(vs: &[Vec2]) -> f64 {
    let n = vs.len();
    0.5 * (0..n).map(|i| vs[i].cross(vs[(i + 1) % n])).sum::<f64>()
}

pub fn polygon_centroid(vs: &[Vec2]) -> Vec2 {
    let n = vs.len();
    let mut c = Vec2::ZERO;
    let mut a2 = 0.0;
    for i in 0..n {
        let (p, q) = (vs[i], vs[(i + 1) % n]);
        let w = p.cross(q);
        a2 += w;
        c += (p + q) * w;
    }
    c * (1.0 / (3.0 * a2))
}

/// True when the polygon has at least three vertices, turns left at every
/// corner and encloses positive area.
pub fn is_convex_ccw(vs: &[Vec2]) -> bool {
    let n = vs.len();
    n >= 3
        && (0..n).all(|i| {
            let a = vs[i];
            let b = vs[(i + 1) % n];
            let c = vs[(i + 2) % n];
            (b - a).cross(c - b) > 0.0
        })
        && polygon_area(vs) > 0.0
}

fn edge_normals(vs: &[Vec2], out: &mut Vec<Vec2>) {
    let n = vs.len();
    for i in 0..n {
        let e = vs[(i + 1) % n] - vs[i];
        // outward normal of a CCW polygon
        out.push(Vec2::new(e.y, -e.x).normalized());
    }
}

/// Candidate separating axes (unit length) for a pair of convex footprints.
fn separating_axes(a: &Footprint, b: &Footprint) -> Vec<Vec2> {
    let mut axes = Vec::with_capacity(16);
    match (a, b) {
        (Footprint::Polygon(pa), Footprint::Polygon(pb)) => {
            edge_normals(pa, &mut axes);
            edge_normals(pb, &mut axes);
        }
        (Footprint::Polygon(p), Footprint::Circle { center, .. })
        | (Footprint::Circle { center, .. }, Footprint::Polygon(p)) => {
            edge_normals(p, &mut axes);
            for v in p {
                let d = *v - *center;
                if d.norm_sq() > 1e-24 {
                    axes.push(d.normalized());
                }
            }
        }
        (Footprint::Circle { center: ca, .. }, Footprint::Circle { center: cb, .. }) => {
            let d = *cb - *ca;
            axes.push(if d.norm_sq() > 1e-24 { d.normalized() } else { Vec2::new(1.0, 0.0) });
        }
    }
    axes
}

/// Minimum translation that separates `b` from `a`: returns the unit axis
/// pointing from `a` towards `b` and the overlap depth along it. `None` when
/// the footprints are disjoint or merely touching.
pub fn penetration(a: &Footprint, b: &Footprint) -> Option<(Vec2, f64)> {
    let mut best: Option<(Vec2, f64)> = None;
    for axis in separating_axes(a, b) {
        let (a0, a1) = a.project(axis);
        let (b0, b1) = b.project(axis);
        let overlap = a1.min(b1) - a0.max(b0);
        if overlap <= 0.0 {
            return None;
        }
        // push b out on whichever side needs less travel
        let forward = a1 - b0;
        let backward = b1 - a0;
        let (dir, depth) = if forward <= backward { (axis, forward) } else { (-axis, backward) };
        if best.is_none_or(|(_, d)| depth < d) {
            best = Some((dir, depth));
        }
    }
    best
}

/// Smallest `t ≥ 0` such that `b` translated by `t·dir` no longer overlaps
/// `a`. `dir` must be a unit vector. Exact for polygon pairs; for pairs with
/// a circle the returned distance always separates but may overshoot slightly.
pub fn directional_separation(a: &Footprint, b: &Footprint, dir: Vec2) -> f64 {
    if let (Footprint::Circle { center: ca, radius: ra }, Footprint::Circle { center: cb, radius: rb }) = (a, b) {
        let f = *cb - *ca;
        let r = ra + rb;
        let bq = f.dot(dir);
        let c = f.norm_sq() - r * r;
        if c >= 0.0 {
            return 0.0;
        }
        return -bq + (bq * bq - c).sqrt();
    }
    let mut best = f64::INFINITY;
    for axis in separating_axes(a, b) {
        let (a0, a1) = a.project(axis);
        let (b0, b1) = b.project(axis);
        if a1 <= b0 || b1 <= a0 {
            return 0.0;
        }
        let dn = dir.dot(axis);
        if dn > 1e-12 {
            best = best.min((a1 - b0) / dn);
        } else if dn < -1e-12 {
            best = best.min((a0 - b1) / dn);
        }
    }
    best
}

/// Overlap depth along the minimum-translation axis, 0 when disjoint.
pub fn overlap_depth(a: &Footprint, b: &Footprint) -> f64 {
    penetration(a, b).map_or(0.0, |(_, d)| d)
}

/// Oriented rectangle centered at `center` with half extents `half_len` along
/// `axis` and `half_wid` across it.
pub fn oriented_rect(center: Vec2, axis: Vec2, half_len: f64, half_wid: f64) -> Footprint {
    let u = axis * half_len;
    let v = axis.perp() * half_wid;
    Footprint::Polygon(vec![center - u - v, center + u - v, center + u + v, center - u + v])
}
