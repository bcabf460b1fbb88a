//! Spectra of the linearized operators: the single-well `L̂₀`, multi-well
//! `L̂₀(z₁, …, z_m)` in the stretched variable `z = x/(√2 ε)`, and the
//! confining `L_ε` in physical `x`; the inverse of `L̂₀` on odd functions;
//! and the asymptotic split eigenfunctions of the double well.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::ansatz::product_ansatz;
use crate::error::SpectrumError;
use crate::grid::{Grid, OperatorMatrix, Parity, ScalarField};
use crate::linalg::{inverse_iteration, smallest_eigenvalues};

/// Minimum half-width for `L̂₀`: the continuum edge at 2 needs room.
pub const MIN_Z_MAX: f64 = 20.0;

/// Symmetric grid in the stretched variable `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZGrid {
    grid: Grid,
}

impl ZGrid {
    /// Odd node count whose spacing `2 z_max / (n + 1)` is closest to `h_z`.
    pub fn new(z_max: f64, h_z: f64) -> Result<Self, SpectrumError> {
        if !(h_z > 0.0 && h_z.is_finite()) {
            return Err(SpectrumError::Invalid(format!("spacing must be positive, got {h_z}")));
        }
        let mut n = ((2.0 * z_max / h_z).round() as usize).saturating_sub(1).max(3);
        if n % 2 == 0 {
            n += 1;
        }
        Self::with_nodes(z_max, n)
    }

    pub fn with_nodes(z_max: f64, n: usize) -> Result<Self, SpectrumError> {
        Ok(Self { grid: Grid::symmetric(z_max, n)? })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn z_max(&self) -> f64 {
        self.grid.x_max()
    }

    pub fn h(&self) -> f64 {
        self.grid.h()
    }

    /// Whether the stretched domain fits inside a physical grid at `eps`.
    pub fn fits_inside(&self, physical: &Grid, eps: f64) -> bool {
        self.z_max() * SQRT_2 * eps <= physical.x_max()
    }
}

fn sech2(z: f64) -> f64 {
    let c = z.cosh();
    if c.is_finite() {
        1.0 / (c * c)
    } else {
        0.0
    }
}

/// `-½ ∂_z² + 2 - 3 sech²(z)`.
pub fn build_l0_single(zgrid: &ZGrid) -> Result<OperatorMatrix, SpectrumError> {
    if zgrid.z_max() < MIN_Z_MAX {
        return Err(SpectrumError::Invalid(format!("z_max = {} is below {MIN_Z_MAX}", zgrid.z_max())));
    }
    let g = zgrid.grid();
    let potential = g.sample(|z| 2.0 - 3.0 * sech2(z));
    Ok(OperatorMatrix::kinetic_plus_potential(g, 0.5, &potential, "L0 single well")?)
}

/// `-½ ∂_z² + 2 - 3 Σ_j sech²(z - z_j)` for sorted centers at least 4 apart.
pub fn build_l0_multi(zgrid: &ZGrid, centers: &[f64]) -> Result<OperatorMatrix, SpectrumError> {
    if centers.is_empty() {
        return Err(SpectrumError::Invalid("at least one well center is required".into()));
    }
    if centers.windows(2).any(|w| !(w[1] - w[0] >= 4.0)) {
        return Err(SpectrumError::Invalid("well centers must be sorted and at least 4 apart".into()));
    }
    if zgrid.z_max() < MIN_Z_MAX || centers.iter().any(|c| c.abs() > zgrid.z_max() - 10.0) {
        return Err(SpectrumError::Invalid(format!("wells {centers:?} need z_max >= max(20, |z_j| + 10), got {}", zgrid.z_max())));
    }
    let g = zgrid.grid();
    let potential = g.sample(|z| 2.0 - 3.0 * centers.iter().map(|c| sech2(z - c)).sum::<f64>());
    Ok(OperatorMatrix::kinetic_plus_potential(g, 0.5, &potential, format!("L0 wells at {centers:?}"))?)
}

/// `-ε² ∂ₓ² + x² - 1 + 3 η² ∏ tanh²((x - a_j)/(√2 ε))`.
pub fn build_leps(grid: &Grid, eps: f64, eta: &ScalarField, positions: &[f64]) -> Result<OperatorMatrix, SpectrumError> {
    eta.check_grid(grid)?;
    let u = product_ansatz(eta, eps, positions).map_err(|e| SpectrumError::Invalid(e.to_string()))?;
    let potential: Vec<f64> = grid.nodes().iter().zip(u.values()).map(|(x, v)| x * x - 1.0 + 3.0 * v * v).collect();
    Ok(OperatorMatrix::kinetic_plus_potential(grid, eps * eps, &potential, format!("L_eps (eps={eps}, a={positions:?})"))?)
}

/// Lowest eigenpairs of a discretized operator.
#[derive(Clone, Debug)]
pub struct SpectrumResult {
    pub operator_label: String,
    pub eigenvalues: Vec<f64>,
    /// Unit norm in the discrete `L²` inner product.
    pub eigenfunctions: Vec<ScalarField>,
    pub k: usize,
    /// `‖A φ - λ φ‖₂` per pair.
    pub residuals: Vec<f64>,
}

/// JSON-facing summary of a [`SpectrumResult`]; eigenfunctions go to CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub operator_label: String,
    pub k: usize,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub parities: Vec<Parity>,
    pub half_width: f64,
    pub n: usize,
}

impl SpectrumResult {
    pub fn summary(&self) -> SpectrumSummary {
        let grid = self.eigenfunctions.first().map(|f| f.grid().clone());
        SpectrumSummary {
            operator_label: self.operator_label.clone(),
            k: self.k,
            eigenvalues: self.eigenvalues.clone(),
            residuals: self.residuals.clone(),
            parities: self.eigenfunctions.iter().map(|f| f.parity()).collect(),
            half_width: grid.as_ref().map_or(0.0, |g| g.x_max()),
            n: grid.as_ref().map_or(0, |g| g.n()),
        }
    }

    /// Largest `|⟨φ_i, φ_j⟩ - δ_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let f = &self.eigenfunctions;
        let mut worst = 0.0f64;
        for i in 0..f.len() {
            for j in 0..=i {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((f[i].dot(&f[j]) - target).abs());
            }
        }
        worst
    }
}

fn l2_residual(op: &OperatorMatrix, lambda: f64, phi: &ScalarField) -> f64 {
    let a = op.apply_values(phi.values());
    let h = op.grid().h();
    (h * a.iter().zip(phi.values()).map(|(x, p)| (x - lambda * p).powi(2)).sum::<f64>()).sqrt()
}

/// The `k` smallest eigenvalues with orthonormal eigenfunctions.
pub fn lowest_eigenpairs(op: &OperatorMatrix, k: usize) -> Result<SpectrumResult, SpectrumError> {
    if k == 0 {
        return Err(SpectrumError::Invalid("k must be at least 1".into()));
    }
    if op.is_reflection_symmetric() && op.n() >= 5 {
        return merge_parity_classes(op, k);
    }
    let off = op.off_diagonal_vec();
    let eigenvalues = smallest_eigenvalues(op.diagonal(), &off, k)?;
    let vectors = inverse_iteration(op.diagonal(), &off, &eigenvalues)?;
    let scale = 1.0 / op.grid().h().sqrt();
    let mut eigenfunctions = Vec::with_capacity(k);
    for v in vectors {
        let values: Vec<f64> = v.iter().map(|x| x * scale).collect();
        eigenfunctions.push(ScalarField::new(op.grid(), values, Parity::None)?);
    }
    let residuals = eigenvalues.iter().zip(&eigenfunctions).map(|(l, f)| l2_residual(op, *l, f)).collect();
    Ok(SpectrumResult { operator_label: op.description().to_string(), eigenvalues, eigenfunctions, k, residuals })
}

// Symmetric operators split into even and odd blocks; solving each block
// separately keeps exponentially close pairs (tunneling doublets) from mixing.
fn merge_parity_classes(op: &OperatorMatrix, k: usize) -> Result<SpectrumResult, SpectrumError> {
    let even_dim = op.n() - op.n() / 2;
    let odd_dim = op.n() / 2;
    let even = lowest_eigenpairs_with_parity(op, Parity::Even, k.min(even_dim))?;
    let odd = lowest_eigenpairs_with_parity(op, Parity::Odd, k.min(odd_dim))?;
    let mut pairs: Vec<(f64, ScalarField, f64)> = Vec::with_capacity(2 * k);
    for r in [even, odd] {
        for ((l, f), res) in r.eigenvalues.into_iter().zip(r.eigenfunctions).zip(r.residuals) {
            pairs.push((l, f, res));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.truncate(k);
    if pairs.len() < k {
        return Err(SpectrumError::Invalid(format!("operator of size {} has fewer than {k} eigenvalues", op.n())));
    }
    let mut eigenvalues = Vec::with_capacity(k);
    let mut eigenfunctions = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for (l, f, r) in pairs {
        eigenvalues.push(l);
        eigenfunctions.push(f);
        residuals.push(r);
    }
    Ok(SpectrumResult { operator_label: op.description().to_string(), eigenvalues, eigenfunctions, k, residuals })
}

/// Lowest eigenpairs within one symmetry class of a reflection-symmetric
/// operator, from the half line with a Dirichlet (odd) or Neumann (even)
/// condition at the center.
pub fn lowest_eigenpairs_with_parity(op: &OperatorMatrix, parity: Parity, k: usize) -> Result<SpectrumResult, SpectrumError> {
    if !op.is_reflection_symmetric() {
        return Err(SpectrumError::Invalid("operator does not commute with reflection".into()));
    }
    if k == 0 {
        return Err(SpectrumError::Invalid("k must be at least 1".into()));
    }
    let n = op.n();
    let c = n / 2;
    let e = op.off_diagonal();
    let (diag, mut off, first) = match parity {
        Parity::Odd => (op.diagonal()[c + 1..].to_vec(), vec![e; n - c - 2], c + 1),
        Parity::Even => (op.diagonal()[c..].to_vec(), vec![e; n - c - 1], c),
        Parity::None => return Err(SpectrumError::Invalid("parity class must be even or odd".into())),
    };
    // The reflected neighbour doubles the first coupling; the similarity
    // scaling u_c = √2 v_0 restores symmetry.
    if parity == Parity::Even {
        off[0] = SQRT_2 * e;
    }
    let eigenvalues = smallest_eigenvalues(&diag, &off, k)?;
    let vectors = inverse_iteration(&diag, &off, &eigenvalues)?;
    let h = op.grid().h();
    let mut eigenfunctions = Vec::with_capacity(k);
    for v in vectors {
        let mut half = v;
        if parity == Parity::Even {
            half[0] *= SQRT_2;
        }
        let mut values = vec![0.0; n];
        for (j, x) in half.iter().enumerate() {
            let i = first + j;
            values[i] = *x;
            values[n - 1 - i] = if parity == Parity::Even { *x } else { -*x };
        }
        let norm = (h * values.iter().map(|x| x * x).sum::<f64>()).sqrt();
        values.iter_mut().for_each(|x| *x /= norm);
        eigenfunctions.push(ScalarField::new(op.grid(), values, parity)?);
    }
    let residuals = eigenvalues.iter().zip(&eigenfunctions).map(|(l, f)| l2_residual(op, *l, f)).collect();
    Ok(SpectrumResult {
        operator_label: format!("{} [{parity:?}]", op.description()),
        eigenvalues,
        eigenfunctions,
        k,
        residuals,
    })
}

/// `f - ⟨f, φ⟩ φ` for unit `φ`: the complement projection as a rank-one deflation.
pub fn project_out(f: &ScalarField, phi: &ScalarField) -> Result<ScalarField, SpectrumError> {
    f.check_grid(phi.grid())?;
    let c = f.dot(phi);
    let values = f.values().iter().zip(phi.values()).map(|(a, p)| a - c * p).collect();
    Ok(ScalarField::new(f.grid(), values, f.parity().times(Parity::Even))?)
}

/// Fraction of `∫ φ²` carried by nodes where `region` holds.
pub fn mass_fraction(phi: &ScalarField, region: impl Fn(f64) -> bool) -> f64 {
    let total: f64 = phi.values().iter().map(|v| v * v).sum();
    let inside: f64 = phi.grid().nodes().iter().zip(phi.values()).filter(|(x, _)| region(**x)).map(|(_, v)| v * v).sum();
    inside / total
}

/// Where an eigenfunction of `L_ε` lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Localization {
    /// Near a soliton core.
    Core,
    /// Near the corner layers `|x| = 1`.
    Edge,
    Extended,
}

/// Share of mass required to call an eigenfunction localized.
pub const LOCALIZED_MASS: f64 = 0.9;

pub fn classify_localization(phi: &ScalarField, eps: f64, positions: &[f64]) -> Localization {
    let core_width = 10.0 * SQRT_2 * eps;
    let edge_width = 6.0 * eps.powf(2.0 / 3.0);
    let core = mass_fraction(phi, |x| positions.iter().any(|a| (x - a).abs() <= core_width));
    let edge = mass_fraction(phi, |x| (x.abs() - 1.0).abs() <= edge_width);
    if core >= LOCALIZED_MASS {
        Localization::Core
    } else if edge >= LOCALIZED_MASS {
        Localization::Edge
    } else {
        Localization::Extended
    }
}

/// `L̂₀⁻¹ f` for odd `f`, exact for the discrete operator of [`build_l0_single`].
///
/// This is the discrete form of
/// `g(z) = -2 sech²(z) ∫₀^z cosh⁴(s) ∫_{-∞}^s f sech²`: the decaying
/// homogeneous solution `φ` plays the role of `sech²`, and only the ratios
/// `φ_{k-1}/φ_k` and the tail sums divided by `φ` are formed, so nothing
/// grows like `cosh⁴`.
pub fn apply_l0_inverse_odd(f: &ScalarField) -> Result<ScalarField, SpectrumError> {
    let g = f.grid();
    let n = g.n();
    let u = f.values();
    let scale = f.sup_norm().max(f64::MIN_POSITIVE);
    let defect = (0..n).map(|i| (u[i] + u[n - 1 - i]).abs()).fold(0.0, f64::max);
    if defect > 1e-12 * scale {
        return Err(SpectrumError::NotOdd(defect));
    }
    let c = n / 2;
    let half = n - 1 - c;
    let h2 = g.h() * g.h();
    let x = g.nodes();
    // Offsets k = 1..=half map to node c + k; index 0 is the center.
    let coef = |k: usize| 2.0 + 2.0 * h2 * (2.0 - 3.0 * sech2(x[c + k]));
    let mut q = vec![0.0; half + 2];
    q[half] = coef(half);
    for k in (1..half).rev() {
        q[k] = coef(k) - 1.0 / q[k + 1];
    }
    let mut p = vec![0.0; half + 1];
    for k in (0..half).rev() {
        let carried = if k + 2 <= half { p[k + 1] / q[k + 2] } else { 0.0 };
        p[k] = 2.0 * h2 * u[c + k + 1] + carried;
    }
    let mut out = vec![0.0; n];
    let mut prev = 0.0;
    for k in 1..=half {
        prev = (prev + p[k - 1]) / q[k];
        out[c + k] = prev;
        out[c - k] = -prev;
    }
    Ok(ScalarField::new(g, out, Parity::Odd)?)
}

/// `(ψ₀(z - ζ) ± ψ₀(z + ζ))/√2` with the unit-norm `ψ₀ = (√3/2) sech²`.
///
/// The pair is not renormalized: `‖ψ±‖² = 1 ± ⟨ψ₀(· - ζ), ψ₀(· + ζ)⟩`.
pub fn split_eigenfunctions(zgrid: &ZGrid, zeta: f64) -> Result<(ScalarField, ScalarField), SpectrumError> {
    if !(zeta >= 2.0) {
        return Err(SpectrumError::Invalid(format!("separation zeta = {zeta} must be at least 2")));
    }
    let psi0 = |z: f64| 0.75f64.sqrt() * sech2(z);
    let g = zgrid.grid();
    let plus = ScalarField::from_fn(g, Parity::Even, |z| (psi0(z - zeta) + psi0(z + zeta)) / SQRT_2);
    let minus = ScalarField::from_fn(g, Parity::Odd, |z| (psi0(z - zeta) - psi0(z + zeta)) / SQRT_2);
    Ok((plus, minus))
}

/// `λ₂ - λ₁` of the double well `L̂₀(ζ)` from the even and odd ground levels.
pub fn tunneling_splitting(zgrid: &ZGrid, zeta: f64) -> Result<f64, SpectrumError> {
    let op = build_l0_multi(zgrid, &[-zeta, zeta])?;
    let even = lowest_eigenpairs_with_parity(&op, Parity::Even, 1)?;
    let odd = lowest_eigenpairs_with_parity(&op, Parity::Odd, 1)?;
    Ok(odd.eigenvalues[0] - even.eigenvalues[0])
}
