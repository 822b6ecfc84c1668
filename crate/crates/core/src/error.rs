use thiserror::Error;

use crate::image::Pixel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("heap placement failed after {attempts} rejected samples")]
    PlacementFailure { attempts: usize },

    #[error("contact separation did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("image is {width}x{height}, at least {min}x{min} is required")]
    ImageTooSmall { width: usize, height: usize, min: usize },

    #[error("pixel ({}, {}) is outside the image", .0.x, .0.y)]
    OutOfBounds(Pixel),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("mask has {available} object pixels, fewer than k = {k}")]
    TooFewPixels { available: usize, k: usize },

    #[error("grasp rectangle leaves the image")]
    RectangleOutOfBounds,

    #[error("no grasp candidates: the depth-filtered mask is empty")]
    NoCandidates,

    #[error("no push entry point found behind the selected region")]
    NoEntryPoint,

    #[error("no grasp attempts to aggregate")]
    NoAttempts,

    #[error("calibration distributions overlap: low side {low:.4} >= high side {high:.4}")]
    Overlap { low: f64, high: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
