//! Damped Newton iteration for discretized second-order BVPs whose
//! Jacobian is symmetric tridiagonal.

use crate::error::NewtonFailure;
use crate::linalg::TridiagonalLu;

/// A discretized nonlinear problem `R(u) = 0` with `-dR/du` tridiagonal.
pub(crate) trait TridiagonalProblem {
    fn residual(&self, u: &[f64]) -> Vec<f64>;
    /// Diagonal and off-diagonal of `-dR/du`. Newton solves `J δ = R`.
    fn jacobian(&self, u: &[f64]) -> (Vec<f64>, Vec<f64>);
    /// Projection applied after every trial step (e.g. parity averaging).
    fn project(&self, _u: &mut [f64]) {}
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct NewtonSettings {
    pub tol: f64,
    pub max_iters: usize,
    pub backtrack: f64,
    pub min_step: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct NewtonOutcome {
    pub u: Vec<f64>,
    pub iterations: usize,
    pub residual_sup: f64,
    /// Sup residual of the initial guess and of every accepted iterate.
    pub history: Vec<f64>,
    /// Sup norm of every full Newton correction `J⁻¹ R`.
    pub steps: Vec<f64>,
}

pub(crate) fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
}

pub(crate) fn damped_newton<P: TridiagonalProblem>(
    problem: &P,
    mut u: Vec<f64>,
    settings: NewtonSettings,
    context: &str,
) -> Result<NewtonOutcome, NewtonFailure> {
    problem.project(&mut u);
    let mut r = problem.residual(&u);
    let mut r_sup = sup(&r);
    let mut history = vec![r_sup];
    let mut steps = Vec::new();
    let fail = |iterations: usize, history: &[f64]| NewtonFailure {
        context: context.to_string(),
        iterations,
        last: *history.last().unwrap_or(&f64::NAN),
        history: history.to_vec(),
    };
    for iter in 0..settings.max_iters {
        if r_sup <= settings.tol {
            return Ok(NewtonOutcome { u, iterations: iter, residual_sup: r_sup, history, steps });
        }
        let (diag, off) = problem.jacobian(&u);
        let lu = TridiagonalLu::factor(&off, &diag, &off, Some(f64::EPSILON)).map_err(|_| fail(iter, &history))?;
        let mut delta = r.clone();
        lu.solve_in_place(&mut delta);
        if delta.iter().any(|d| !d.is_finite()) {
            return Err(fail(iter, &history));
        }
        steps.push(sup(&delta));
        let mut step = 1.0;
        let mut accepted = None;
        while step >= settings.min_step {
            let mut trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + step * d).collect();
            problem.project(&mut trial);
            let tr = problem.residual(&trial);
            let tr_sup = sup(&tr);
            if tr_sup < r_sup {
                accepted = Some((trial, tr, tr_sup));
                break;
            }
            step *= settings.backtrack;
        }
        match accepted {
            Some((nu, nr, nr_sup)) => {
                u = nu;
                r = nr;
                r_sup = nr_sup;
                history.push(r_sup);
            }
            None => return Err(fail(iter, &history)),
        }
    }
    if r_sup <= settings.tol {
        Ok(NewtonOutcome { u, iterations: settings.max_iters, residual_sup: r_sup, history, steps })
    } else {
        Err(fail(settings.max_iters, &history))
    }
}

/// Convergence order measured from the last iterates above `floor`: the
/// slope of `log r_{k+1}` against `log r_k`. Applied to Newton corrections
/// it measures the residual in the norm induced by the Jacobian.
pub fn observed_order(history: &[f64], floor: f64) -> Option<f64> {
    let mut best = None;
    for w in history.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        if a < 1.0 && b < a && c < b && c > floor {
            best = Some((c.ln() - b.ln()) / (b.ln() - a.ln()));
        }
    }
    best
}
