//! Lloyd's k-means on pixel coordinates with k-means++ seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{BinaryMask, Pixel};

pub const MAX_ITERATIONS: usize = 50;
/// Lloyd stops once no centroid moves further than this, px.
pub const SHIFT_TOLERANCE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<[f64; 2]>,
    /// Within-cluster sum of squares after each assignment step.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
}

#[inline]
fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn seed_plus_plus(points: &[[f64; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())]);
    let mut d2: Vec<f64> = points.iter().map(|&p| dist2(p, centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave `target` just past the final sum
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            rng.gen_range(0..points.len())
        };
        let c = points[next];
        centroids.push(c);
        for (d, &p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, c));
        }
    }
    centroids
}

fn nearest(centroids: &[[f64; 2]], p: [f64; 2]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, &c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Runs k-means++ seeded Lloyd iterations. Empty clusters keep their previous
/// centroid.
pub fn kmeans(points: &[[f64; 2]], k: usize, seed: u64) -> Result<KMeansResult> {
    if k == 0 || points.len() < k {
        return Err(Error::TooFewPixels {
            available: points.len(),
            k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(points, k, &mut rng);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut sums = vec![[0.0f64; 2]; k];
    let mut counts = vec![0usize; k];

    for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        sums.iter_mut().for_each(|s| *s = [0.0, 0.0]);
        counts.iter_mut().for_each(|c| *c = 0);
        let mut objective = 0.0;
        for &p in points {
            let (j, d) = nearest(&centroids, p);
            objective += d;
            sums[j][0] += p[0];
            sums[j][1] += p[1];
            counts[j] += 1;
        }
        trace.push(objective);

        let mut shift: f64 = 0.0;
        for j in 0..k {
            if counts[j] == 0 {
                continue;
            }
            let n = counts[j] as f64;
            let c = [sums[j][0] / n, sums[j][1] / n];
            shift = shift.max(dist2(c, centroids[j]).sqrt());
            centroids[j] = c;
        }
        if shift < SHIFT_TOLERANCE {
            break;
        }
    }
    Ok(KMeansResult {
        centroids,
        objective_trace: trace,
        iterations,
    })
}

/// Clusters the object pixels of `mask` and returns one centroid per cluster,
/// each snapped to the nearest object pixel (ties to the smaller row-major
/// index).
pub fn cluster_candidates(mask: &BinaryMask, k: usize, seed: u64) -> Result<Vec<Pixel>> {
    let pixels: Vec<Pixel> = mask.set_pixels().collect();
    let points: Vec<[f64; 2]> = pixels.iter().map(|p| [p.x as f64, p.y as f64]).collect();
    let result = kmeans(&points, k, seed)?;
    Ok(result
        .centroids
        .iter()
        .map(|&c| {
            let (i, _) = nearest_point(&points, c);
            pixels[i]
        })
        .collect())
}

/// Index of the point closest to `c`; the first one wins ties.
fn nearest_point(points: &[[f64; 2]], c: [f64; 2]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, &p) in points.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}
