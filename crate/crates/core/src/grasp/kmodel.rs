//! Linear object-count model `k = β0 + β1·A + β2·G`, fitted by ordinary
//! least squares on (area spread, global clutter) samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_K_MAX: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KModel {
    pub beta: [f64; 3],
    pub k_max: usize,
}

impl KModel {
    pub fn new(beta: [f64; 3]) -> Self {
        Self {
            beta,
            k_max: DEFAULT_K_MAX,
        }
    }

    pub fn predict_raw(&self, area: f64, g_cs: f64) -> f64 {
        self.beta[0] + self.beta[1] * area + self.beta[2] * g_cs
    }

    pub fn estimate(&self, area: f64, g_cs: f64) -> usize {
        estimate_k(area, g_cs, self, self.k_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KSample {
    pub area: f64,
    pub g_cs: f64,
    /// Object count label; real-valued so synthetic targets can be exact.
    pub k: f64,
}

/// Rounded model prediction clamped to `[1, k_max]`.
pub fn estimate_k(area: f64, g_cs: f64, model: &KModel, k_max: usize) -> usize {
    let raw = model.predict_raw(area, g_cs).round();
    if raw.is_nan() || raw < 1.0 {
        1
    } else {
        (raw as usize).clamp(1, k_max.max(1))
    }
}

/// Solves the 3×3 normal equations `XᵀX β = Xᵀy` with partial pivoting.
pub fn fit_k_model(samples: &[KSample]) -> Result<KModel> {
    if samples.len() < 3 {
        return Err(Error::RankDeficient);
    }
    let mut a = [[0.0f64; 4]; 3];
    for s in samples {
        let row = [1.0, s.area, s.g_cs];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += row[i] * row[j];
            }
            a[i][3] += row[i] * s.k;
        }
    }
    let scale = (0..3).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() <= 1e-10 * scale {
            return Err(Error::RankDeficient);
        }
        a.swap(col, pivot);
        for r in 0..3 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..4 {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Ok(KModel::new(std::array::from_fn(|i| a[i][3] / a[i][i])))
}

/// Mean absolute error of rounded, clamped predictions.
pub fn mean_abs_error(model: &KModel, samples: &[KSample]) -> f64 {
    samples
        .iter()
        .map(|s| (model.estimate(s.area, s.g_cs) as f64 - s.k).abs())
        .sum::<f64>()
        / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_examples() {
        assert_eq!(estimate_k(0.3, 0.9, &KModel::new([1.0, 0.0, 0.0]), 25), 1);
        assert_eq!(estimate_k(0.5, 123.0, &KModel::new([0.0, 20.0, 0.0]), 25), 10);
        assert_eq!(estimate_k(0.5, 0.5, &KModel::new([-5.0, 0.0, 0.0]), 25), 1);
        assert_eq!(estimate_k(1.0, 0.0, &KModel::new([0.0, 100.0, 0.0]), 25), 25);
    }

    #[test]
    fn identical_inputs_are_rank_deficient() {
        let s: Vec<KSample> = (0..10).map(|k| KSample { area: 0.2, g_cs: 0.4, k: k as f64 }).collect();
        assert!(matches!(fit_k_model(&s), Err(Error::RankDeficient)));
        assert!(matches!(fit_k_model(&s[..2]), Err(Error::RankDeficient)));
    }

    #[test]
    fn collinear_inputs_are_rank_deficient() {
        let s: Vec<KSample> = (0..10)
            .map(|i| KSample {
                area: i as f64 * 0.05,
                g_cs: i as f64 * 0.1,
                k: i as f64,
            })
            .collect();
        assert!(matches!(fit_k_model(&s), Err(Error::RankDeficient)));
    }
}
