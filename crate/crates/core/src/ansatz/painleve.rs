use serde::Serialize;

use crate::error::AnsatzError;
use crate::grid::{Grid, Parity, ScalarField};
use crate::newton::{damped_newton, sup, NewtonSettings, TridiagonalProblem};

/// Discrete solution of `4ν'' + yν - ν³ = 0` with `ν(y_min) = 0` and
/// `ν(y_max) = sqrt(y_max)`.
#[derive(Clone, Debug, Serialize)]
pub struct PainleveSolution {
    /// Nodes including both boundary points.
    pub y_nodes: Vec<f64>,
    pub nu_values: Vec<f64>,
    pub residual_norm: f64,
    pub residual_history: Vec<f64>,
    /// Sup norm of each Newton correction.
    pub step_history: Vec<f64>,
}

impl PainleveSolution {
    pub fn y_min(&self) -> f64 {
        self.y_nodes[0]
    }

    pub fn y_max(&self) -> f64 {
        *self.y_nodes.last().unwrap()
    }

    /// `ν₀(y)`, clamped to 0 below the domain and to `sqrt(y)` above it.
    pub fn eval(&self, y: f64) -> f64 {
        let (lo, hi) = (self.y_min(), self.y_max());
        if y <= lo {
            return 0.0;
        }
        if y >= hi {
            return y.sqrt();
        }
        let h = (hi - lo) / (self.y_nodes.len() - 1) as f64;
        let s = (y - lo) / h;
        let i = (s.floor() as usize).min(self.y_nodes.len() - 2);
        let t = s - i as f64;
        (1.0 - t) * self.nu_values[i] + t * self.nu_values[i + 1]
    }

    /// `sup_{y ≥ 0} |ν₀(y) - sqrt(y)|` over the sampled nodes.
    pub fn max_deviation_from_sqrt(&self) -> f64 {
        self.y_nodes
            .iter()
            .zip(&self.nu_values)
            .filter(|(y, _)| **y >= 0.0)
            .map(|(y, v)| (v - y.sqrt()).abs())
            .fold(0.0, f64::max)
    }
}

struct PainleveBvp {
    y: Vec<f64>,
    h: f64,
    right: f64,
}

impl TridiagonalProblem for PainleveBvp {
    fn residual(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let c = 4.0 / (self.h * self.h);
        (0..n)
            .map(|i| {
                let left = if i == 0 { 0.0 } else { u[i - 1] };
                let right = if i + 1 == n { self.right } else { u[i + 1] };
                c * (right - 2.0 * u[i] + left) + self.y[i] * u[i] - u[i] * u[i] * u[i]
            })
            .collect()
    }

    fn jacobian(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let c = 4.0 / (self.h * self.h);
        let diag = u.iter().zip(&self.y).map(|(v, y)| 2.0 * c - y + 3.0 * v * v).collect();
        (diag, vec![-c; u.len() - 1])
    }
}

/// Damped Newton on `n` uniformly spaced nodes (boundary nodes included).
pub fn solve_painleve(y_min: f64, y_max: f64, n: usize) -> Result<PainleveSolution, AnsatzError> {
    if !(y_min <= -10.0 && y_max >= 10.0) || n < 5 {
        return Err(AnsatzError::PainleveDomain { y_min, y_max });
    }
    let h = (y_max - y_min) / (n - 1) as f64;
    let y_nodes: Vec<f64> = (0..n).map(|i| if i == n - 1 { y_max } else { y_min + i as f64 * h }).collect();
    let interior: Vec<f64> = y_nodes[1..n - 1].to_vec();
    // Smoothed square root: stays in the basin of the positive solution.
    let guess: Vec<f64> = interior.iter().map(|y| (y.max(0.0) + 0.1).sqrt()).collect();
    let problem = PainleveBvp { y: interior, h, right: y_max.sqrt() };
    let settings = NewtonSettings { tol: 1e-10, max_iters: 60, backtrack: 0.5, min_step: 2f64.powi(-20) };
    let outcome = damped_newton(&problem, guess, settings, "painleve")?;
    let mut nu_values = Vec::with_capacity(n);
    nu_values.push(0.0);
    nu_values.extend_from_slice(&outcome.u);
    nu_values.push(y_max.sqrt());
    let residual_norm = sup(&problem.residual(&outcome.u));
    Ok(PainleveSolution { y_nodes, nu_values, residual_norm, residual_history: outcome.history, step_history: outcome.steps })
}

/// Leading-order corner layer `ε^{1/3} ν₀((1 - x²)/ε^{2/3})`.
pub fn corner_layer_field(grid: &Grid, eps: f64, pnl: &PainleveSolution) -> ScalarField {
    let scale = eps.cbrt();
    let stretch = eps.powf(2.0 / 3.0);
    ScalarField::from_fn(grid, Parity::Even, |x| scale * pnl.eval((1.0 - x * x) / stretch))
}
