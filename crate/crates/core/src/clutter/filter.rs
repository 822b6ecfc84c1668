//! Separable Gaussian-family filters with reflect padding.

use crate::image::Grid;

/// Sampled, normalized Gaussian with radius `ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r).map(|t| (-(t * t) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// First derivative of a Gaussian, scaled so a unit ramp responds with 1.
/// Applied as a correlation, so the response is `+df/dx`.
pub fn gaussian_derivative_kernel(sigma: f64) -> Vec<f64> {
    let g = gaussian_kernel(sigma);
    let r = (g.len() / 2) as i64;
    let mut k: Vec<f64> = (-r..=r).zip(&g).map(|(t, &w)| t as f64 * w).collect();
    let norm: f64 = (-r..=r).zip(&k).map(|(t, &w)| t as f64 * w).sum();
    k.iter_mut().for_each(|v| *v /= norm);
    k
}

/// Symmetric (half-sample) reflection: `-1 → 0`, `n → n - 1`.
#[inline]
fn reflect(i: i64, n: i64) -> usize {
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Correlates every row with `kernel`.
pub fn filter_rows(src: &Grid<f64>, kernel: &[f64]) -> Grid<f64> {
    let (w, h) = src.dims();
    let r = (kernel.len() / 2) as i64;
    let mut out = Grid::filled(w, h, 0.0);
    let mut padded = vec![0.0; w + 2 * r as usize];
    for y in 0..h {
        let row = &src.data()[y * w..(y + 1) * w];
        for (i, p) in padded.iter_mut().enumerate() {
            *p = row[reflect(i as i64 - r, w as i64)];
        }
        let dst = &mut out.data_mut()[y * w..(y + 1) * w];
        for (t, &k) in kernel.iter().enumerate() {
            for (d, v) in dst.iter_mut().zip(&padded[t..t + w]) {
                *d += k * v;
            }
        }
    }
    out
}

/// Correlates every column with `kernel`.
pub fn filter_cols(src: &Grid<f64>, kernel: &[f64]) -> Grid<f64> {
    let (w, h) = src.dims();
    let r = (kernel.len() / 2) as i64;
    let mut out = Grid::filled(w, h, 0.0);
    for y in 0..h {
        let dst_start = y * w;
        for (t, &k) in kernel.iter().enumerate() {
            let sy = reflect(y as i64 + t as i64 - r, h as i64);
            let src_row = &src.data()[sy * w..(sy + 1) * w];
            let dst = &mut out.data_mut()[dst_start..dst_start + w];
            for (d, s) in dst.iter_mut().zip(src_row) {
                *d += k * s;
            }
        }
    }
    out
}

pub fn gaussian_blur(src: &Grid<f64>, sigma: f64) -> Grid<f64> {
    let k = gaussian_kernel(sigma);
    filter_cols(&filter_rows(src, &k), &k)
}

/// Gaussian-smoothed gradient `(d/dx, d/dy)`.
pub fn gaussian_gradient(src: &Grid<f64>, sigma: f64) -> (Grid<f64>, Grid<f64>) {
    let g = gaussian_kernel(sigma);
    let d = gaussian_derivative_kernel(sigma);
    let dx = filter_cols(&filter_rows(src, &d), &g);
    let dy = filter_cols(&filter_rows(src, &g), &d);
    (dx, dy)
}
