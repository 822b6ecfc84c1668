//! sRGB (D65) to CIE L*a*b* conversion.

use std::collections::HashMap;

use crate::image::{Grid, RgbImage};

/// D65 reference white in XYZ, Y normalized to 1.
const WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83];

const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

#[inline]
fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Converts one gamma-encoded sRGB triple in `[0, 1]` to `(L, a, b)`.
pub fn srgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let xyz: [f64; 3] = std::array::from_fn(|r| (0..3).map(|c| SRGB_TO_XYZ[r][c] * lin[c]).sum());
    let fx = lab_f(xyz[0] / WHITE[0]);
    let fy = lab_f(xyz[1] / WHITE[1]);
    let fz = lab_f(xyz[2] / WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Per-pixel Lab planes `[L, a, b]`.
pub type LabImage = [Grid<f64>; 3];

pub fn rgb_to_lab(image: &RgbImage) -> LabImage {
    // rendered scenes hold few distinct colors
    let mut seen: HashMap<[u64; 3], [f64; 3]> = HashMap::new();
    let lab = image.map(|&p| *seen.entry(p.map(f64::to_bits)).or_insert_with(|| srgb_to_lab(p)));
    [lab.map(|p| p[0]), lab.map(|p| p[1]), lab.map(|p| p[2])]
}
