//! Error norms, zero extraction, log-log rate fits and claim reports over
//! ε-sweeps.

use serde::{Deserialize, Serialize};

use crate::ansatz::{product_ansatz, tf_cloud};
use crate::error::{AnalysisError, GridError};
use crate::gpe::StationaryState;
use crate::grid::ScalarField;

/// Node values at or below this magnitude are treated as exact zeros.
pub const PINNED_ZERO: f64 = 1e-13;

/// `max |f - g|` over the nodes.
pub fn sup_error(f: &ScalarField, g: &ScalarField) -> Result<f64, GridError> {
    f.check_grid(g.grid())?;
    Ok(f.values().iter().zip(g.values()).fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

/// `sup_K |f - g| + sup_K |f' - g'|` with centered differences, `K = [lo, hi] ⊂ (-1, 1)`.
pub fn c1_error_on_compact(f: &ScalarField, g: &ScalarField, k: (f64, f64)) -> Result<f64, AnalysisError> {
    let (lo, hi) = k;
    if !(lo > -1.0 && hi < 1.0 && lo <= hi) {
        return Err(AnalysisError::CompactSet(lo, hi));
    }
    f.check_grid(g.grid())?;
    let (df, dg) = (f.derivative(), g.derivative());
    let mut value = 0.0f64;
    let mut slope = 0.0f64;
    for (i, &x) in f.grid().nodes().iter().enumerate() {
        if x >= lo && x <= hi {
            value = value.max((f.values()[i] - g.values()[i]).abs());
            slope = slope.max((df[i] - dg[i]).abs());
        }
    }
    Ok(value + slope)
}

/// Sign changes of a sampled function, ordered.
///
/// Only nodes with `|u| > PINNED_ZERO` carry a sign. Consecutive signed nodes
/// of opposite sign bracket one zero: adjacent nodes are resolved by linear
/// interpolation, and a single near-zero node between them is reported at
/// its own coordinate. Tails that decay below the threshold are not zeros.
pub fn find_zeros(f: &ScalarField) -> Vec<f64> {
    let x = f.grid().nodes();
    let u = f.values();
    let signed: Vec<usize> = (0..u.len()).filter(|&i| u[i].abs() > PINNED_ZERO).collect();
    let mut zeros = Vec::new();
    for w in signed.windows(2) {
        let (i, j) = (w[0], w[1]);
        if (u[i] > 0.0) == (u[j] > 0.0) {
            continue;
        }
        let z = if j == i + 2 {
            x[i + 1]
        } else {
            x[i] - u[i] * (x[j] - x[i]) / (u[j] - u[i])
        };
        zeros.push(z);
    }
    zeros
}

/// Least-squares fit `log value = intercept + slope · log eps`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl RateFit {
    pub fn predict(&self, eps: f64) -> f64 {
        (self.intercept + self.slope * eps.ln()).exp()
    }
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit, AnalysisError> {
    if points.len() < 3 {
        return Err(AnalysisError::TooFewPoints(points.len()));
    }
    for (i, &(e, v)) in points.iter().enumerate() {
        if !(e > 0.0 && v > 0.0 && e.is_finite() && v.is_finite()) {
            return Err(AnalysisError::NonPositive { eps: e, value: v });
        }
        if points[..i].iter().any(|p| p.0 == e) {
            return Err(AnalysisError::DuplicateEps(e));
        }
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit { points: points.to_vec(), slope, intercept, r_squared })
}

/// How a report decides `pass`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `|slope - expected| ≤ tolerance`.
    TwoSided,
    /// `slope ≥ expected - tolerance`.
    AtLeast,
    /// A per-ε inequality; no fit.
    Pointwise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub claim_id: String,
    pub kind: CheckKind,
    pub fitted_rate: Option<RateFit>,
    pub expected_rate: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub note: String,
    /// `eps,value,fitted,residual` rows, ascending in eps.
    pub raw_table: String,
}

/// Formatting used by every emitted CSV number.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn table(rows: &[(f64, f64, f64)]) -> String {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut s = String::from("eps,value,fitted,residual\n");
    for (e, v, f) in rows {
        s.push_str(&format!("{},{},{},{}\n", fmt_num(e), fmt_num(v), fmt_num(f), fmt_num(v - f)));
    }
    s
}

/// Ratio between the largest and smallest `value / eps^p`.
pub fn constant_band(points: &[(f64, f64)], p: f64) -> f64 {
    let cs: Vec<f64> = points.iter().map(|(e, v)| v / e.powf(p)).collect();
    let hi = cs.iter().cloned().fold(f64::MIN, f64::max);
    let lo = cs.iter().cloned().fold(f64::MAX, f64::min);
    hi / lo
}

/// Report for a rate claim. `min_r_squared` applies to two-sided fits only.
pub fn rate_report(
    claim_id: &str,
    points: &[(f64, f64)],
    kind: CheckKind,
    expected_rate: f64,
    tolerance: f64,
    min_r_squared: f64,
) -> Result<VerificationReport, AnalysisError> {
    let fit = fit_rate(points)?;
    let band = constant_band(points, expected_rate);
    let pass = match kind {
        CheckKind::TwoSided => (fit.slope - expected_rate).abs() <= tolerance && fit.r_squared >= min_r_squared,
        CheckKind::AtLeast => fit.slope >= expected_rate - tolerance,
        CheckKind::Pointwise => unreachable!("pointwise claims have no fit"),
    };
    let rows: Vec<(f64, f64, f64)> = points.iter().map(|&(e, v)| (e, v, fit.predict(e))).collect();
    Ok(VerificationReport {
        claim_id: claim_id.to_string(),
        kind,
        note: format!("slope {:.4}, r^2 {:.5}, max/min of value/eps^{expected_rate:.4} = {band:.4}", fit.slope, fit.r_squared),
        raw_table: table(&rows),
        fitted_rate: Some(fit),
        expected_rate,
        tolerance,
        pass,
    })
}

fn pointwise_report(claim_id: &str, rows: &[(f64, f64, f64)], pass: bool, note: String) -> VerificationReport {
    VerificationReport {
        claim_id: claim_id.to_string(),
        kind: CheckKind::Pointwise,
        fitted_rate: None,
        expected_rate: 0.0,
        tolerance: 0.0,
        pass,
        note,
        raw_table: table(rows),
    }
}

/// Solved states and reference positions for [`verify_claims`].
#[derive(Clone, Debug, Default)]
pub struct Sweep {
    pub ground: Vec<StationaryState>,
    /// First excited states; each needs a ground state at the same ε on the same grid.
    pub first_excited: Vec<StationaryState>,
    /// Second excited states paired with the scalar-equation root `a`.
    pub second_excited: Vec<(StationaryState, f64)>,
}

/// Allowed spread of the measured constant `C` in `value ≤ C ε^p`.
pub const CONSTANT_BAND: f64 = 3.0;

fn ground_at<'a>(sweep: &'a Sweep, state: &StationaryState) -> Option<&'a StationaryState> {
    sweep.ground.iter().find(|g| g.eps == state.eps && g.grid().same_as(state.grid()))
}

/// Measured values per claim, before any pass/fail decision.
pub fn ground_metrics(state: &StationaryState) -> Result<GroundMetrics, AnalysisError> {
    let eta = &state.field;
    let tf = tf_cloud(eta.grid());
    let eps = state.eps;
    let reach = 1.0 + eps.powf(2.0 / 3.0);
    let min_inside = eta
        .grid()
        .nodes()
        .iter()
        .zip(eta.values())
        .filter(|(x, _)| x.abs() <= reach)
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    Ok(GroundMetrics {
        eps,
        c1_interior: c1_error_on_compact(eta, &tf, (-0.9, 0.9))?,
        sup_error: sup_error(eta, &tf)?,
        max_derivative: eta.derivative().iter().fold(0.0, |m, d| m.max(d.abs())),
        min_value: eta.values().iter().cloned().fold(f64::INFINITY, f64::min),
        max_value: eta.values().iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        min_inside,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundMetrics {
    pub eps: f64,
    pub c1_interior: f64,
    pub sup_error: f64,
    pub max_derivative: f64,
    pub min_value: f64,
    pub max_value: f64,
    /// `min η` over `|x| ≤ 1 + ε^{2/3}`.
    pub min_inside: f64,
}

/// `sup |u - η ∏ tanh((x - a_j)/(√2 ε))|`.
pub fn ansatz_error(state: &StationaryState, ground: &StationaryState, positions: &[f64]) -> Result<f64, AnalysisError> {
    let ansatz = product_ansatz(&ground.field, state.eps, positions)?;
    Ok(sup_error(&state.field, &ansatz)?)
}

/// One report per claim the sweep supports.
pub fn verify_claims(sweep: &Sweep) -> Result<Vec<VerificationReport>, AnalysisError> {
    if sweep.ground.len() < 3 {
        return Err(AnalysisError::InsufficientSweep(sweep.ground.len()));
    }
    let metrics = sweep.ground.iter().map(ground_metrics).collect::<Result<Vec<_>, _>>()?;
    let mut reports = Vec::new();

    let p1_rows: Vec<(f64, f64, f64)> = metrics.iter().map(|m| (m.eps, m.max_value, 1.0 + 1e-8)).collect();
    let p1_pass = metrics.iter().all(|m| m.min_value > 0.0 && m.max_value <= 1.0 + 1e-8);
    let min_all = metrics.iter().map(|m| m.min_value).fold(f64::INFINITY, f64::min);
    reports.push(pointwise_report("P1", &p1_rows, p1_pass, format!("min value {min_all:e}")));

    let pts = |f: fn(&GroundMetrics) -> f64| metrics.iter().map(|m| (m.eps, f(m))).collect::<Vec<_>>();
    reports.push(rate_report("P2", &pts(|m| m.c1_interior), CheckKind::TwoSided, 2.0, 0.3, 0.98)?);
    reports.push(rate_report("P3-sup", &pts(|m| m.sup_error), CheckKind::TwoSided, 1.0 / 3.0, 0.1, 0.0)?);
    reports.push(rate_report("P3-deriv", &pts(|m| m.max_derivative), CheckKind::TwoSided, -1.0 / 3.0, 0.1, 0.0)?);

    let p4: Vec<(f64, f64)> = metrics.iter().map(|m| (m.eps, m.min_inside / m.eps.cbrt())).collect();
    let band = constant_band(&p4, 0.0);
    let p4_rows: Vec<(f64, f64, f64)> = p4.iter().map(|&(e, c)| (e, c, 0.0)).collect();
    reports.push(pointwise_report(
        "P4",
        &p4_rows,
        p4.iter().all(|p| p.1 > 0.0) && band <= CONSTANT_BAND,
        format!("min eta / eps^(1/3) spread factor {band:.4}"),
    ));

    let thm1: Vec<(f64, f64)> = sweep
        .first_excited
        .iter()
        .filter_map(|s| ground_at(sweep, s).map(|g| ansatz_error(s, g, &[0.0]).map(|v| (s.eps, v))))
        .collect::<Result<_, _>>()?;
    if thm1.len() >= 3 {
        let mut r = rate_report("Thm1", &thm1, CheckKind::AtLeast, 2.0 / 3.0, 2.0 / 3.0 - 0.55, 0.0)?;
        let c_band = constant_band(&thm1, 2.0 / 3.0);
        r.pass &= c_band <= CONSTANT_BAND;
        reports.push(r);
    }

    if sweep.second_excited.len() >= 3 {
        let mut thm2 = Vec::new();
        let mut rem2 = Vec::new();
        for (s, a) in &sweep.second_excited {
            if let Some(g) = ground_at(sweep, s) {
                thm2.push((s.eps, ansatz_error(s, g, &[-a, *a])?));
            }
            let x0 = s.zeros.last().copied().unwrap_or(f64::NAN);
            rem2.push((s.eps, (x0 - a).abs()));
        }
        if thm2.len() >= 3 {
            reports.push(rate_report("Thm2", &thm2, CheckKind::AtLeast, 2.0 / 3.0, 2.0 / 3.0 - 0.55, 0.0)?);
        }
        reports.push(rate_report("Rem2", &rem2, CheckKind::AtLeast, 5.0 / 3.0, 5.0 / 3.0 - 1.4, 0.0)?);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::dark_soliton;
    use crate::grid::{make_grid, Parity};

    #[test]
    fn sup_error_basics() {
        let g = make_grid(2.0, 101).unwrap();
        let tf = tf_cloud(&g);
        assert_eq!(sup_error(&tf, &tf).unwrap(), 0.0);
        assert_eq!(sup_error(&ScalarField::zeros(&g, Parity::Even), &tf).unwrap(), 1.0);
        let other = make_grid(2.0, 103).unwrap();
        assert!(sup_error(&tf, &tf_cloud(&other)).is_err());
    }

    #[test]
    fn compact_set_must_avoid_the_edge() {
        let g = make_grid(2.0, 101).unwrap();
        let tf = tf_cloud(&g);
        assert_eq!(c1_error_on_compact(&tf, &tf, (-0.9, 0.9)).unwrap(), 0.0);
        assert!(matches!(c1_error_on_compact(&tf, &tf, (-1.0, 0.9)), Err(AnalysisError::CompactSet(..))));
    }

    #[test]
    fn c1_error_of_a_shift() {
        let g = make_grid(2.0, 4001).unwrap();
        let f = ScalarField::from_fn(&g, Parity::None, |x| x);
        let h = ScalarField::from_fn(&g, Parity::None, |x| 2.0 * x);
        // |f - h| ≤ 0.5 on K and |f' - h'| = 1.
        assert!((c1_error_on_compact(&f, &h, (-0.5, 0.5)).unwrap() - 1.5).abs() < 1e-3);
    }

    #[test]
    fn zeros_of_simple_fields() {
        let g = make_grid(2.0, 401).unwrap();
        assert_eq!(find_zeros(&dark_soliton(&g, 0.05, 0.0)), vec![0.0]);
        assert!(find_zeros(&tf_cloud(&g)).is_empty());
        let shifted = ScalarField::from_fn(&g, Parity::None, |x| x - 0.123);
        let z = find_zeros(&shifted);
        assert_eq!(z.len(), 1);
        assert!((z[0] - 0.123).abs() < 1e-14);
    }

    #[test]
    fn decayed_tails_are_not_zeros() {
        let g = make_grid(2.0, 11).unwrap();
        let v = vec![-1e-20, 1e-30, 0.0, 0.5, 1.0, 1.0, 1.0, 0.5, 0.0, -1e-25, 1e-40];
        let f = ScalarField::new(&g, v, Parity::None).unwrap();
        assert!(find_zeros(&f).is_empty());
    }

    #[test]
    fn exact_power_laws() {
        let eps = [0.05, 0.02, 0.01, 0.005];
        let sq: Vec<_> = eps.iter().map(|e| (*e, e * e)).collect();
        let f = fit_rate(&sq).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let cube: Vec<_> = eps.iter().map(|e| (*e, 3.0 * e.cbrt())).collect();
        let f = fit_rate(&cube).unwrap();
        assert!((f.slope - 1.0 / 3.0).abs() < 1e-12);
        assert!((f.predict(0.01) - 3.0 * 0.01f64.cbrt()).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_points() {
        assert_eq!(fit_rate(&[(0.1, 1.0), (0.2, 2.0)]), Err(AnalysisError::TooFewPoints(2)));
        assert!(matches!(fit_rate(&[(0.1, 1.0), (0.2, 0.0), (0.3, 1.0)]), Err(AnalysisError::NonPositive { .. })));
        assert!(matches!(fit_rate(&[(0.1, 1.0), (0.1, 2.0), (0.3, 1.0)]), Err(AnalysisError::DuplicateEps(_))));
    }

    #[test]
    fn one_sided_reports() {
        let pts: Vec<_> = [0.05, 0.02, 0.01].iter().map(|e| (*e, e * e)).collect();
        let r = rate_report("x", &pts, CheckKind::AtLeast, 2.0 / 3.0, 0.1, 0.0).unwrap();
        assert!(r.pass);
        let r = rate_report("x", &pts, CheckKind::TwoSided, 2.0 / 3.0, 0.1, 0.0).unwrap();
        assert!(!r.pass);
        assert!(r.raw_table.starts_with("eps,value,fitted,residual\n1.0000000000000000e-2,"));
        assert_eq!(r.raw_table.lines().count(), 4);
    }

    #[test]
    fn insufficient_sweep() {
        assert_eq!(verify_claims(&Sweep::default()), Err(AnalysisError::InsufficientSweep(0)));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn fit_recovers_exponent(p in -3.0f64..3.0, c in 0.01f64..100.0) {
                let pts: Vec<_> = [0.05f64, 0.02, 0.01, 0.005].iter().map(|e| (*e, c * e.powf(p))).collect();
                let f = fit_rate(&pts).unwrap();
                prop_assert!((f.slope - p).abs() < 1e-12);
                prop_assert!(f.r_squared >= 0.0 && f.r_squared <= 1.0);
            }

            #[test]
            fn zeros_are_sorted_and_bracketed(centers in proptest::collection::btree_set(-150i32..150, 1..5)) {
                let g = make_grid(2.0, 801).unwrap();
                let cs: Vec<f64> = centers.iter().map(|c| *c as f64 * 0.01 + 0.00123).collect();
                let f = ScalarField::from_fn(&g, Parity::None, |x| cs.iter().fold(1.0, |acc, c| acc * (x - c)));
                let z = find_zeros(&f);
                prop_assert_eq!(z.len(), cs.len());
                for (a, b) in z.iter().zip(&cs) {
                    prop_assert!((a - b).abs() < g.h());
                }
            }
        }
    }
}
