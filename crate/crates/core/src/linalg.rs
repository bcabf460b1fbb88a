//! Tridiagonal kernels: partially pivoted LU (the `gttrf`/`gttrs` scheme),
//! Sturm-sequence bisection, and inverse iteration.
//!
//! Newton Jacobians of excited states are indefinite, so the solver always
//! pivots.

use crate::error::LinalgError;

/// LU factors of a general tridiagonal matrix with row interchanges.
#[derive(Clone, Debug)]
pub struct TridiagonalLu {
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    dl: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    /// Factors the matrix with sub-diagonal `sub`, diagonal `diag` and
    /// super-diagonal `sup`. A zero pivot is replaced by `zero_pivot` when it
    /// is `Some`, otherwise the factorization fails.
    pub fn factor(sub: &[f64], diag: &[f64], sup: &[f64], zero_pivot: Option<f64>) -> Result<Self, LinalgError> {
        let n = diag.len();
        assert!(sub.len() + 1 == n.max(1) && sup.len() + 1 == n.max(1), "tridiagonal band lengths");
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut dl = sub.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    match zero_pivot {
                        Some(p) => d[i] = p,
                        None => return Err(LinalgError::Singular(i)),
                    }
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if n > 0 && d[n - 1] == 0.0 {
            match zero_pivot {
                Some(p) => d[n - 1] = p,
                None => return Err(LinalgError::Singular(n - 1)),
            }
        }
        Ok(Self { d, du, du2, dl, swapped })
    }

    /// Symmetric matrix with a constant off-diagonal, shifted by `-shift`.
    pub fn factor_symmetric(diag: &[f64], off: &[f64], shift: f64, zero_pivot: Option<f64>) -> Result<Self, LinalgError> {
        let shifted: Vec<f64> = diag.iter().map(|d| d - shift).collect();
        Self::factor(off, &shifted, off, zero_pivot)
    }

    /// Overwrites `b` with the solution.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        if n == 0 {
            return;
        }
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i] - self.dl[i] * b[i + 1];
                b[i] = b[i + 1];
                b[i + 1] = temp;
            } else {
                b[i + 1] -= self.dl[i] * b[i];
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

/// Solves a symmetric tridiagonal system `(diag, off) x = rhs`.
pub fn solve_symmetric(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let lu = TridiagonalLu::factor(off, diag, off, None)?;
    let mut x = rhs.to_vec();
    lu.solve_in_place(&mut x);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::Singular(0));
    }
    Ok(x)
}

fn gerschgorin(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// Number of eigenvalues strictly below `x` (Sturm sequence of the LDLᵀ pivots).
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let pivmin = f64::MIN_POSITIVE * off.iter().fold(1.0_f64, |m, e| m.max(e * e));
    let mut count = 0;
    let mut q = diag[0] - x;
    for i in 0..diag.len() {
        if i > 0 {
            q = diag[i] - x - off[i - 1] * off[i - 1] / q;
        }
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k` smallest eigenvalues by bisection, ascending.
pub fn smallest_eigenvalues(diag: &[f64], off: &[f64], k: usize) -> Result<Vec<f64>, LinalgError> {
    let n = diag.len();
    if k > n {
        return Err(LinalgError::TooManyEigenpairs { requested: k, n });
    }
    let (lo, hi) = gerschgorin(diag, off);
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let abs_tol = 0.5 * f64::EPSILON * scale;
    let mut values = Vec::with_capacity(k);
    let mut left = lo - abs_tol;
    for j in 0..k {
        let mut a = left;
        let mut b = hi + abs_tol;
        loop {
            let mid = 0.5 * (a + b);
            if b - a <= abs_tol || mid <= a || mid >= b {
                break;
            }
            if sturm_count(diag, off, mid) > j {
                b = mid;
            } else {
                a = mid;
            }
        }
        let lam = 0.5 * (a + b);
        values.push(lam);
        left = a;
    }
    Ok(values)
}

/// Eigenvectors for the given eigenvalues by inverse iteration, with
/// Gram-Schmidt against earlier vectors so clusters stay orthogonal.
/// Vectors are normalized in the Euclidean norm.
pub fn inverse_iteration(diag: &[f64], off: &[f64], eigenvalues: &[f64]) -> Result<Vec<Vec<f64>>, LinalgError> {
    let n = diag.len();
    let (lo, hi) = gerschgorin(diag, off);
    let scale = lo.abs().max(hi.abs()).max(1.0);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(eigenvalues.len());
    for (j, &lam) in eigenvalues.iter().enumerate() {
        let lu = TridiagonalLu::factor_symmetric(diag, off, lam, Some(f64::EPSILON * scale))?;
        // Deterministic start vector with components along every eigenvector.
        let mut seed: u64 = 0x9E37_79B9_7F4A_7C15 ^ (j as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        let mut x: Vec<f64> = (0..n)
            .map(|_| {
                seed ^= seed << 13;
                seed ^= seed >> 7;
                seed ^= seed << 17;
                (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        let mut converged = false;
        for _ in 0..8 {
            lu.solve_in_place(&mut x);
            orthogonalize(&mut x, &vectors);
            let norm = normalize(&mut x);
            if !norm.is_finite() || norm == 0.0 {
                return Err(LinalgError::InverseIteration(lam));
            }
            orthogonalize(&mut x, &vectors);
            normalize(&mut x);
            if residual(diag, off, lam, &x) <= 1e3 * f64::EPSILON * scale {
                converged = true;
                break;
            }
        }
        if !converged && residual(diag, off, lam, &x) > 1e-9 * scale {
            return Err(LinalgError::InverseIteration(lam));
        }
        vectors.push(x);
    }
    Ok(vectors)
}

fn orthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for v in basis {
        let c: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum();
        for (xi, vi) in x.iter_mut().zip(v) {
            *xi -= c * vi;
        }
    }
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        for v in x.iter_mut() {
            *v /= norm;
        }
    }
    norm
}

fn residual(diag: &[f64], off: &[f64], lam: f64, x: &[f64]) -> f64 {
    let n = diag.len();
    let mut s = 0.0;
    for i in 0..n {
        let mut r = (diag[i] - lam) * x[i];
        if i > 0 {
            r += off[i - 1] * x[i - 1];
        }
        if i + 1 < n {
            r += off[i] * x[i + 1];
        }
        s += r * r;
    }
    s.sqrt()
}
