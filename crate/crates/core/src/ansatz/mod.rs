//! Closed-form building blocks: the Thomas-Fermi cloud, dark solitons,
//! soliton-product states and the Painlevé-II corner layer.

mod painleve;

pub use painleve::{corner_layer_field, solve_painleve, PainleveSolution};

use std::f64::consts::SQRT_2;

use crate::error::AnsatzError;
use crate::grid::{Grid, Parity, ScalarField};

/// `η₀(x) = sqrt(1 - x²)` on `|x| < 1`, zero outside.
pub fn tf_profile(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (1.0 - x * x).sqrt()
    } else {
        0.0
    }
}

/// Sampled Thomas-Fermi cloud.
pub fn tf_cloud(grid: &Grid) -> ScalarField {
    ScalarField::from_fn(grid, Parity::Even, tf_profile)
}

/// `tanh((x - center) / (√2 ε))`.
pub fn dark_soliton(grid: &Grid, eps: f64, center: f64) -> ScalarField {
    let parity = if center == 0.0 { Parity::Odd } else { Parity::None };
    ScalarField::from_fn(grid, parity, |x| ((x - center) / (SQRT_2 * eps)).tanh())
}

/// `η(x) ∏ⱼ tanh((x - aⱼ)/(√2 ε))`.
///
/// Symmetric position sets give a field with the parity of `m`; other sets
/// produce an untagged field.
pub fn product_ansatz(eta: &ScalarField, eps: f64, positions: &[f64]) -> Result<ScalarField, AnsatzError> {
    if positions.windows(2).any(|w| !(w[1] > w[0])) || positions.iter().any(|a| !a.is_finite()) {
        return Err(AnsatzError::UnorderedPositions);
    }
    let m = positions.len();
    let symmetric = (0..m).all(|j| positions[j] == -positions[m - 1 - j]);
    let parity = if symmetric { eta.parity().times(Parity::of_zero_count(m)) } else { Parity::None };
    let width = SQRT_2 * eps;
    Ok(eta.map(parity, |x, e| positions.iter().fold(e, |acc, a| acc * ((x - a) / width).tanh())))
}
