//! Equilibrium soliton positions: the closed-form asymptotics, the scalar
//! balance equation `4√2 ε a = 32 exp(-2√2 a/ε)`, its `U`/`V` fixed-point
//! forms, and the nearest-neighbour interaction system for `m` solitons.

use std::f64::consts::{LN_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::EquilibriumError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionSource {
    Asymptotic,
    ScalarRoot,
    TodaRoot,
    Manual,
}

/// A priori size and separation bounds evaluated at a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsCheck {
    /// `max_j |a_j| / (√2 ε^{2/3})`; the bound asks for a value below 1.
    pub beta: f64,
    /// `max_j exp(-√2 (a_{j+1} - a_j)/ε) / (ε² |log ε|)`.
    pub pair_constant: f64,
    pub within_trap_scale: bool,
    pub separated: bool,
}

/// Constant used for the separation bound `exp(-√2 gap/ε) ≤ C ε² |log ε|`.
pub const PAIR_BOUND_CONSTANT: f64 = 1.0;

impl BoundsCheck {
    pub fn evaluate(eps: f64, positions: &[f64]) -> Self {
        let beta = positions.iter().fold(0.0f64, |m, a| m.max(a.abs())) / (SQRT_2 * eps.powf(2.0 / 3.0));
        let scale = eps * eps * eps.ln().abs();
        let pair_constant =
            positions.windows(2).map(|w| (-SQRT_2 * (w[1] - w[0]) / eps).exp() / scale).fold(0.0f64, f64::max);
        Self { beta, pair_constant, within_trap_scale: beta < 1.0, separated: pair_constant <= PAIR_BOUND_CONSTANT }
    }

    pub fn ok(&self) -> bool {
        self.within_trap_scale && self.separated
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonConfig {
    pub eps: f64,
    pub positions: Vec<f64>,
    pub source: PositionSource,
    /// Residual of the defining equation (0 for `asymptotic` and `manual`).
    pub residual: f64,
    pub bounds: BoundsCheck,
}

impl SolitonConfig {
    pub fn new(eps: f64, positions: Vec<f64>, source: PositionSource, residual: f64) -> Result<Self, EquilibriumError> {
        if positions.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(EquilibriumError::Unordered);
        }
        let bounds = BoundsCheck::evaluate(eps, &positions);
        Ok(Self { eps, positions, source, residual, bounds })
    }

    pub fn m(&self) -> usize {
        self.positions.len()
    }

    /// `max_j |a_j + a_{m+1-j}|`.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.positions.len();
        (0..m).map(|j| (self.positions[j] + self.positions[m - 1 - j]).abs()).fold(0.0, f64::max)
    }
}

fn check_eps(eps: f64, upper: f64) -> Result<(), EquilibriumError> {
    if !(eps > 0.0 && eps < upper) {
        return Err(EquilibriumError::OutOfRange(eps));
    }
    if eps > 0.1 {
        log::warn!("eps = {eps} is outside the asymptotic regime (eps <= 0.1)");
    }
    Ok(())
}

/// `a = -(ε/√2)(log ε + ½ log|log ε| - (3/2) log 2)`.
pub fn predict_position_asymptotic(eps: f64) -> Result<f64, EquilibriumError> {
    check_eps(eps, (-1.0f64).exp())?;
    let l = eps.ln();
    Ok(-(eps / SQRT_2) * (l + 0.5 * l.abs().ln() - 1.5 * LN_2))
}

/// Log form of the balance equation; increasing in `a`.
fn balance_log(eps: f64, a: f64) -> f64 {
    2.0 * SQRT_2 * a / eps + a.ln() + (4.0 * SQRT_2 * eps).ln() - 32f64.ln()
}

/// `(4√2 ε a - 32 exp(-2√2 a/ε)) / (4√2 ε a)`.
pub fn balance_relative_residual(eps: f64, a: f64) -> f64 {
    let lhs = 4.0 * SQRT_2 * eps * a;
    (lhs - 32.0 * (-2.0 * SQRT_2 * a / eps).exp()) / lhs
}

/// Root of the two-soliton balance equation by safeguarded Newton on the
/// bracket `[ε², 1]`.
pub fn solve_bifurcation_scalar(eps: f64) -> Result<SolitonConfig, EquilibriumError> {
    check_eps(eps, 1.0)?;
    let (mut lo, mut hi) = (eps * eps, 1.0);
    if !(balance_log(eps, lo) < 0.0 && balance_log(eps, hi) > 0.0) {
        return Err(EquilibriumError::Diverged(format!("no sign change on [{lo}, {hi}] at eps = {eps}")));
    }
    let mut a = predict_position_asymptotic(eps).ok().filter(|a| *a > lo && *a < hi).unwrap_or(0.5 * (lo + hi));
    for _ in 0..200 {
        let g = balance_log(eps, a);
        if g == 0.0 {
            break;
        }
        if g < 0.0 {
            lo = a;
        } else {
            hi = a;
        }
        let dg = 2.0 * SQRT_2 / eps + 1.0 / a;
        let newton = a - g / dg;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if next == a || hi - lo <= 4.0 * f64::EPSILON * a {
            a = next;
            break;
        }
        a = next;
    }
    let residual = balance_relative_residual(eps, a);
    SolitonConfig::new(eps, vec![-a, a], PositionSource::ScalarRoot, residual.abs())
}

/// Fixed points of the `U` and `V` reformulations and the positions they imply.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UvRefinement {
    pub u: f64,
    pub v: f64,
    /// `-(ε log ε / √2) U`.
    pub a: f64,
    /// Position implied by `V`; equal to `a` up to rounding.
    pub a_from_v: f64,
    pub iterations_u: usize,
    pub iterations_v: usize,
}

fn fixed_point(mut x: f64, step: impl Fn(f64) -> f64) -> Result<(f64, usize), EquilibriumError> {
    for k in 1..=500 {
        let next = step(x);
        if !next.is_finite() {
            return Err(EquilibriumError::Diverged(format!("fixed-point iterate left the domain after {k} steps")));
        }
        let change = (next - x).abs();
        x = next;
        if change <= 1e-15 * x.abs().max(1.0) {
            return Ok((x, k));
        }
    }
    Err(EquilibriumError::Diverged("fixed-point iteration did not settle in 500 steps".into()))
}

pub fn refine_uv(eps: f64) -> Result<UvRefinement, EquilibriumError> {
    check_eps(eps, (-1.0f64).exp())?;
    let le = eps.ln();
    let ll = le.abs().ln();
    let (u, iterations_u) = fixed_point(1.0, |u| 1.0 + (ll - 3.0 * LN_2 + u.ln()) / (2.0 * le))?;
    let (v, iterations_v) = fixed_point(0.0, |v| -3.0 * LN_2 / ll + (1.0 + ll * (1.0 + v) / (2.0 * le)).ln() / ll)?;
    let scale = -eps * le / SQRT_2;
    let u_from_v = 1.0 + ll / (2.0 * le) * (1.0 + v);
    Ok(UvRefinement { u, v, a: scale * u, a_from_v: scale * u_from_v, iterations_u, iterations_v })
}

/// Residual of the interaction system; missing neighbours contribute 0.
pub fn toda_residual(eps: f64, a: &[f64]) -> Vec<f64> {
    let m = a.len();
    let kappa = SQRT_2 / eps;
    (0..m)
        .map(|j| {
            let right = if j + 1 < m { (-kappa * (a[j + 1] - a[j])).exp() } else { 0.0 };
            let left = if j > 0 { (-kappa * (a[j] - a[j - 1])).exp() } else { 0.0 };
            4.0 * SQRT_2 * eps * a[j] + 32.0 * (right - left)
        })
        .collect()
}

fn symmetrize_positions(a: &mut [f64]) {
    let m = a.len();
    for j in 0..m / 2 {
        let s = 0.5 * (a[m - 1 - j] - a[j]);
        a[j] = -s;
        a[m - 1 - j] = s;
    }
    if m % 2 == 1 {
        a[m / 2] = 0.0;
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
}

/// Symmetric equilibrium of `m` solitons by damped Newton, started from
/// equally spaced positions at the two-soliton root spacing.
pub fn solve_toda(eps: f64, m: usize) -> Result<SolitonConfig, EquilibriumError> {
    check_eps(eps, 1.0)?;
    if m == 0 {
        return Err(EquilibriumError::Diverged("m must be at least 1".into()));
    }
    if m >= 3 && eps > 0.05 {
        log::warn!("eps = {eps} is large for m = {m}; separation bounds may fail");
    }
    let spacing = 2.0 * solve_bifurcation_scalar(eps)?.positions[1];
    let mut a: Vec<f64> = (0..m).map(|j| (j as f64 - (m as f64 - 1.0) / 2.0) * spacing).collect();
    symmetrize_positions(&mut a);
    let kappa = SQRT_2 / eps;
    let mut r = toda_residual(eps, &a);
    let mut r_sup = sup(&r);
    for _ in 0..200 {
        if m == 1 {
            break;
        }
        // Symmetric positive definite tridiagonal Jacobian.
        let mut diag = vec![4.0 * SQRT_2 * eps; m];
        let mut off = vec![0.0; m - 1];
        for j in 0..m - 1 {
            let t = 32.0 * kappa * (-kappa * (a[j + 1] - a[j])).exp();
            diag[j] += t;
            diag[j + 1] += t;
            off[j] = -t;
        }
        let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        let delta = crate::linalg::solve_symmetric(&diag, &off, &rhs)
            .map_err(|e| EquilibriumError::Diverged(e.to_string()))?;
        let mut step = 1.0;
        let mut accepted = false;
        while step >= 2f64.powi(-30) {
            let mut trial: Vec<f64> = a.iter().zip(&delta).map(|(x, d)| x + step * d).collect();
            symmetrize_positions(&mut trial);
            if trial.windows(2).all(|w| w[1] > w[0]) {
                let tr = toda_residual(eps, &trial);
                let tr_sup = sup(&tr);
                if tr_sup < r_sup {
                    a = trial;
                    r = tr;
                    r_sup = tr_sup;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            // No further decrease: the iterate sits at the rounding floor.
            break;
        }
    }
    if r_sup > 1e-12 {
        return Err(EquilibriumError::Diverged(format!("interaction system residual {r_sup:e} at eps = {eps}, m = {m}")));
    }
    let check = sup(&toda_residual(eps, &a));
    SolitonConfig::new(eps, a, PositionSource::TodaRoot, check)
}

/// All four position estimates at one `ε` (the interaction root for `m`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PositionTable {
    pub eps: f64,
    pub a_asymptotic: f64,
    pub a_scalar: f64,
    pub a_uv: f64,
    pub toda: SolitonConfig,
}

pub fn position_table(eps: f64, m: usize) -> Result<PositionTable, EquilibriumError> {
    Ok(PositionTable {
        eps,
        a_asymptotic: predict_position_asymptotic(eps)?,
        a_scalar: solve_bifurcation_scalar(eps)?.positions[1],
        a_uv: refine_uv(eps)?.a,
        toda: solve_toda(eps, m)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain bisection on the exponential form, independent of the solver.
    fn bisect_root(eps: f64) -> f64 {
        let f = |a: f64| 4.0 * SQRT_2 * eps * a - 32.0 * (-2.0 * SQRT_2 * a / eps).exp();
        let (mut lo, mut hi) = (eps, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn asymptotic_values() {
        let a = predict_position_asymptotic(0.01).unwrap();
        assert!((a - 0.0345157).abs() < 5e-7, "{a}");
        assert!(a <= SQRT_2 * 0.01f64.powf(2.0 / 3.0));
        assert!(predict_position_asymptotic(0.5).is_err());
        assert!(predict_position_asymptotic(0.0).is_err());
        let mut last = f64::INFINITY;
        for eps in [1e-2, 1e-3, 1e-4] {
            let ratio = predict_position_asymptotic(eps).unwrap() / (eps * -eps.ln() / SQRT_2);
            assert!((ratio - 1.0).abs() < (last - 1.0).abs());
            last = ratio;
        }
    }

    #[test]
    fn scalar_root_matches_bisection() {
        for eps in [0.001, 0.005, 0.01, 0.02, 0.05, 0.1] {
            let c = solve_bifurcation_scalar(eps).unwrap();
            let a = c.positions[1];
            let b = bisect_root(eps);
            assert!((a - b).abs() <= 1e-14 * a, "eps {eps}: {a} vs {b}");
            assert!(c.residual <= 1e-14, "residual {}", c.residual);
            assert_eq!(c.source, PositionSource::ScalarRoot);
        }
        let c = solve_bifurcation_scalar(0.01).unwrap();
        let asym = predict_position_asymptotic(0.01).unwrap();
        assert!((c.positions[1] - asym).abs() / c.positions[1] <= 0.05);
    }

    #[test]
    fn scalar_root_scaling() {
        let roots: Vec<f64> = [0.001, 0.005, 0.01, 0.05].iter().map(|e| solve_bifurcation_scalar(*e).unwrap().positions[1]).collect();
        assert!(roots.windows(2).all(|w| w[1] > w[0]));
        let ratio = |eps: f64| solve_bifurcation_scalar(eps).unwrap().positions[1] / (eps * eps.ln().abs());
        let target = 1.0 / SQRT_2;
        // U - 1 changes sign near eps = 3e-4, so compare well below that.
        assert!((ratio(1e-30) - target).abs() < (ratio(1e-8) - target).abs());
        assert!((ratio(1e-150) - target).abs() < (ratio(1e-30) - target).abs());
    }

    #[test]
    fn uv_limits_and_agreement() {
        let sweep: Vec<UvRefinement> = [1e-2, 1e-4, 1e-8, 1e-16, 1e-64, 1e-256].iter().map(|e| refine_uv(*e).unwrap()).collect();
        assert!(sweep.windows(2).all(|w| w[1].v.abs() < w[0].v.abs()));
        // U - 1 changes sign near eps = 3e-4.
        assert!(sweep[2..].windows(2).all(|w| (w[1].u - 1.0).abs() < (w[0].u - 1.0).abs()));
        assert!(sweep.iter().all(|r| (r.a - r.a_from_v).abs() <= 1e-14 * r.a));
        for eps in [0.02, 0.01, 0.005] {
            let r = refine_uv(eps).unwrap();
            let root = solve_bifurcation_scalar(eps).unwrap().positions[1];
            let asym = predict_position_asymptotic(eps).unwrap();
            assert!((r.a - root).abs() <= (root - asym).abs());
        }
    }

    #[test]
    fn toda_special_cases() {
        let one = solve_toda(0.01, 1).unwrap();
        assert_eq!(one.positions, vec![0.0]);
        for eps in [0.02, 0.01, 0.005] {
            let two = solve_toda(eps, 2).unwrap();
            let root = solve_bifurcation_scalar(eps).unwrap().positions[1];
            assert!((two.positions[1] - root).abs() <= 1e-12);
            assert!(two.symmetry_defect() <= 1e-13);
            let three = solve_toda(eps, 3).unwrap();
            assert_eq!(three.positions[1], 0.0);
            assert_eq!(three.positions[2], -three.positions[0]);
            assert!(three.positions[2] > 0.0);
        }
    }

    #[test]
    fn toda_residual_is_independent_of_the_solver() {
        let c = solve_toda(0.01, 4).unwrap();
        // Re-evaluate the balance equations term by term.
        let k = SQRT_2 / 0.01;
        let a = &c.positions;
        let e = |g: f64| (-k * g).exp();
        let r0 = 4.0 * SQRT_2 * 0.01 * a[0] + 32.0 * e(a[1] - a[0]);
        let r1 = 4.0 * SQRT_2 * 0.01 * a[1] + 32.0 * (e(a[2] - a[1]) - e(a[1] - a[0]));
        assert!(r0.abs() <= 1e-12 && r1.abs() <= 1e-12);
        assert!(a.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn bounds_flags() {
        let c = solve_bifurcation_scalar(0.01).unwrap();
        assert!(c.bounds.ok(), "{:?}", c.bounds);
        let far = SolitonConfig::new(0.01, vec![-0.5, 0.5], PositionSource::Manual, 0.0).unwrap();
        assert!(!far.bounds.within_trap_scale);
        let close = SolitonConfig::new(0.01, vec![-0.001, 0.001], PositionSource::Manual, 0.0).unwrap();
        assert!(!close.bounds.separated);
        assert!(SolitonConfig::new(0.01, vec![0.1, -0.1], PositionSource::Manual, 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn toda_roots_are_symmetric_and_ordered(m in 1usize..6, eps in 0.002f64..0.02) {
                let c = solve_toda(eps, m).unwrap();
                prop_assert!(c.symmetry_defect() <= 1e-13);
                prop_assert!(c.positions.windows(2).all(|w| w[1] > w[0]));
                prop_assert!(sup(&toda_residual(eps, &c.positions)) <= 1e-12);
            }

            #[test]
            fn scalar_root_balances(eps in 1e-4f64..0.1) {
                let c = solve_bifurcation_scalar(eps).unwrap();
                prop_assert!(c.residual <= 1e-14);
            }
        }
    }
}
