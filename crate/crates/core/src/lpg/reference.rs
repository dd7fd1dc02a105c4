//! Reference fit on the full 298-agent CNN dataset, kept for
//! cross-checking the similarity metric and for seeding experiments.

use super::hyper::LpgHyperparameters;
use crate::domain::N_FEATURES;

/// Reference saliency matrix, rows and columns in canonical feature order.
#[rustfmt::skip]
#[allow(clippy::approx_constant)] // fitted values, not π
pub const REFERENCE_SALIENCY: [[f64; N_FEATURES]; N_FEATURES] = [
    [0.994, 0.349,  0.289,  0.142, -0.253,  0.065,  0.461,  0.092,  0.239,  0.157],
    [0.0,   2.088, -0.379, -0.318,  0.188,  0.099,  0.114,  0.341,  0.206,  0.133],
    [0.0,   0.0,    1.549, -0.394,  0.131,  0.325,  0.097,  0.116,  0.211,  0.076],
    [0.0,   0.0,    0.0,    2.080,  0.044,  0.011,  0.183,  0.216,  0.277,  0.181],
    [0.0,   0.0,    0.0,    0.0,    1.445, -0.084,  0.689,  0.417,  0.115,  0.100],
    [0.0,   0.0,    0.0,    0.0,    0.0,    2.794, -0.476, -0.468, -0.536, -0.587],
    [0.0,   0.0,    0.0,    0.0,    0.0,    0.0,    1.781,  0.157,  0.280, -0.476],
    [0.0,   0.0,    0.0,    0.0,    0.0,    0.0,    0.0,    1.157, -0.158,  0.294],
    [0.0,   0.0,    0.0,    0.0,    0.0,    0.0,    0.0,    0.0,    2.428, -0.470],
    [0.0,   0.0,    0.0,    0.0,    0.0,    0.0,    0.0,    0.0,    0.0,    2.478],
];

pub const REFERENCE_TAU: f64 = 0.698;
pub const REFERENCE_W0: f64 = -0.372;

/// Diagonal of the reference `SSᵀ`, three decimals.
pub const REFERENCE_SIMILARITY_DIAGONAL: [f64; N_FEATURES] =
    [1.585, 4.838, 2.750, 4.516, 2.767, 8.882, 3.500, 1.449, 6.115, 6.141];

pub fn reference_hyperparameters() -> LpgHyperparameters {
    LpgHyperparameters::from_square_table(&REFERENCE_SALIENCY, REFERENCE_TAU, REFERENCE_W0)
        .expect("reference table satisfies the upper-triangular pattern")
}
