//! Symmetric uniform grids and second-order finite-difference operators.
//!
//! A [`Grid`] samples the open interval `(-x_max, x_max)` at `n` interior
//! nodes; homogeneous Dirichlet values are implied at both ends. `n` is odd,
//! so `x = 0` is always the middle node, and node coordinates are mirrored
//! so that `x_i == -x_{n+1-i}` holds bitwise.

use std::fmt;
use std::sync::Arc;

use crate::error::GridError;

/// Uniform symmetric grid on a truncated line.
#[derive(Clone)]
pub struct Grid {
    x_max: f64,
    h: f64,
    nodes: Arc<[f64]>,
}

impl Grid {
    /// Builds a symmetric grid with an arbitrary positive half-width.
    ///
    /// This is the constructor shared by physical and stretched grids; the
    /// physical-domain precondition `x_max > 1` is enforced by [`make_grid`].
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self, GridError> {
        if n < 3 || n % 2 == 0 {
            return Err(GridError::NodeCount(n));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(GridError::HalfWidth(half_width));
        }
        let h = 2.0 * half_width / (n as f64 + 1.0);
        let mid = n / 2;
        let mut nodes = vec![0.0; n];
        // Right half first, then mirror; the middle node stays exactly 0.
        for k in 1..=mid {
            let x = k as f64 * h;
            nodes[mid + k] = x;
            nodes[mid - k] = -x;
        }
        Ok(Self { x_max: half_width, h, nodes: nodes.into() })
    }

    /// Grid whose spacing does not exceed `h_max`.
    pub fn with_max_spacing(half_width: f64, h_max: f64) -> Result<Self, GridError> {
        Self::symmetric(half_width, auto_node_count(half_width, h_max))
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Index of the `x = 0` node.
    pub fn mid(&self) -> usize {
        self.nodes.len() / 2
    }

    /// Index mirrored about the middle node.
    pub fn mirror(&self, i: usize) -> usize {
        self.nodes.len() - 1 - i
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.nodes, &other.nodes)
            || (self.nodes.len() == other.nodes.len()
                && self.x_max.to_bits() == other.x_max.to_bits())
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("x_max", &self.x_max)
            .field("n", &self.n())
            .field("h", &self.h)
            .finish()
    }
}

/// Smallest odd node count whose spacing `2 x_max / (n + 1)` is at most `h_max`.
pub fn auto_node_count(half_width: f64, h_max: f64) -> usize {
    let n = (2.0 * half_width / h_max).ceil().max(3.0) as usize;
    if n % 2 == 0 {
        n + 1
    } else {
        n
    }
}

/// Physical-domain grid; the domain must strictly contain the support `|x| < 1`.
pub fn make_grid(x_max: f64, n: usize) -> Result<Grid, GridError> {
    if !(x_max > 1.0) {
        return Err(GridError::DomainTooSmall(x_max));
    }
    Grid::symmetric(x_max, n)
}

/// Reflection symmetry class of a sampled function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    None,
}

impl Parity {
    /// Parity of a state with `m` zeros.
    pub fn of_zero_count(m: usize) -> Self {
        if m % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn times(self, other: Parity) -> Parity {
        match (self, other) {
            (Parity::None, _) | (_, Parity::None) => Parity::None,
            (a, b) if a == b => Parity::Even,
            _ => Parity::Odd,
        }
    }
}

/// Real samples of a function on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    parity: Parity,
}

impl ScalarField {
    pub fn new(grid: &Grid, values: Vec<f64>, parity: Parity) -> Result<Self, GridError> {
        if values.len() != grid.n() {
            return Err(GridError::LengthMismatch { expected: grid.n(), found: values.len() });
        }
        let mut field = Self { grid: grid.clone(), values, parity };
        field.enforce_parity();
        Ok(field)
    }

    pub fn from_fn(grid: &Grid, parity: Parity, f: impl Fn(f64) -> f64) -> Self {
        let mut field = Self { grid: grid.clone(), values: grid.sample(f), parity };
        field.enforce_parity();
        field
    }

    pub fn zeros(grid: &Grid, parity: Parity) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.n()], parity }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// Re-tags the field and averages it onto the requested symmetry class.
    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self.enforce_parity();
        self
    }

    /// Averages `u(x)` with `±u(-x)` according to the parity tag.
    pub fn enforce_parity(&mut self) {
        symmetrize(&mut self.values, self.parity);
    }

    /// Largest deviation from the tagged symmetry.
    pub fn parity_defect(&self) -> f64 {
        let sign = match self.parity {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
            Parity::None => return 0.0,
        };
        let n = self.values.len();
        (0..n).map(|i| (self.values[i] - sign * self.values[n - 1 - i]).abs()).fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoidal inner product; the Dirichlet end values are zero.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        self.grid.h() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn map(&self, parity: Parity, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let values = self.grid.nodes().iter().zip(&self.values).map(|(&x, &v)| f(x, v)).collect();
        let mut out = ScalarField { grid: self.grid.clone(), values, parity };
        out.enforce_parity();
        out
    }

    /// Linear interpolation onto another grid; zero outside the source domain.
    pub fn resample(&self, target: &Grid) -> ScalarField {
        let src = self.grid.nodes();
        let h = self.grid.h();
        let x0 = -self.grid.x_max();
        let n = src.len();
        let value_at = |i: isize| -> f64 {
            if i < 1 || i as usize > n {
                0.0
            } else {
                self.values[i as usize - 1]
            }
        };
        let values = target
            .sample(|x| {
                let s = (x - x0) / h;
                if s <= 0.0 || s >= (n + 1) as f64 {
                    return 0.0;
                }
                let i = s.floor() as isize;
                let t = s - i as f64;
                (1.0 - t) * value_at(i) + t * value_at(i + 1)
            });
        let mut out = ScalarField { grid: target.clone(), values, parity: self.parity };
        out.enforce_parity();
        out
    }

    /// Centered first differences (one-sided against the Dirichlet ends).
    pub fn derivative(&self) -> Vec<f64> {
        let n = self.values.len();
        let h = self.grid.h();
        (0..n)
            .map(|i| {
                let left = if i == 0 { 0.0 } else { self.values[i - 1] };
                let right = if i + 1 == n { 0.0 } else { self.values[i + 1] };
                (right - left) / (2.0 * h)
            })
            .collect()
    }

    pub(crate) fn check_grid(&self, other: &Grid) -> Result<(), GridError> {
        if self.grid.same_as(other) {
            Ok(())
        } else {
            Err(GridError::GridMismatch)
        }
    }
}

pub(crate) fn symmetrize(values: &mut [f64], parity: Parity) {
    let sign = match parity {
        Parity::Even => 1.0,
        Parity::Odd => -1.0,
        Parity::None => return,
    };
    let n = values.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let avg = 0.5 * (values[i] + sign * values[j]);
        values[i] = avg;
        values[j] = sign * avg;
    }
    if sign < 0.0 {
        values[n / 2] = 0.0;
    }
}

/// Symmetric tridiagonal operator with constant off-diagonal.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    grid: Grid,
    diagonal: Vec<f64>,
    off_diagonal: f64,
    description: String,
}

impl OperatorMatrix {
    pub fn new(grid: &Grid, diagonal: Vec<f64>, off_diagonal: f64, description: impl Into<String>) -> Result<Self, GridError> {
        if diagonal.len() != grid.n() {
            return Err(GridError::LengthMismatch { expected: grid.n(), found: diagonal.len() });
        }
        Ok(Self { grid: grid.clone(), diagonal, off_diagonal, description: description.into() })
    }

    /// `-c ∂² + V` with homogeneous Dirichlet ends.
    pub fn kinetic_plus_potential(grid: &Grid, kinetic: f64, potential: &[f64], description: impl Into<String>) -> Result<Self, GridError> {
        let h2 = grid.h() * grid.h();
        let diag = potential.iter().map(|v| 2.0 * kinetic / h2 + v).collect();
        Self::new(grid, diag, -kinetic / h2, description)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn off_diagonal(&self) -> f64 {
        self.off_diagonal
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn n(&self) -> usize {
        self.diagonal.len()
    }

    /// Matrix-vector product on raw values.
    pub fn apply_values(&self, f: &[f64]) -> Vec<f64> {
        let n = self.diagonal.len();
        let e = self.off_diagonal;
        (0..n)
            .map(|i| {
                let mut s = self.diagonal[i] * f[i];
                if i > 0 {
                    s += e * f[i - 1];
                }
                if i + 1 < n {
                    s += e * f[i + 1];
                }
                s
            })
            .collect()
    }

    /// Whether the diagonal is mirror-symmetric (operator commutes with reflection).
    pub fn is_reflection_symmetric(&self) -> bool {
        let n = self.diagonal.len();
        (0..n / 2).all(|i| self.diagonal[i] == self.diagonal[n - 1 - i])
    }

    pub fn off_diagonal_vec(&self) -> Vec<f64> {
        vec![self.off_diagonal; self.diagonal.len().saturating_sub(1)]
    }
}

/// Discrete `-ε² ∂² + V` on `grid`.
pub fn schrodinger_matrix(grid: &Grid, eps: f64, potential: &ScalarField) -> Result<OperatorMatrix, GridError> {
    potential.check_grid(grid)?;
    OperatorMatrix::kinetic_plus_potential(grid, eps * eps, potential.values(), format!("-eps^2 d2 + V (eps={eps})"))
}

/// Applies `op` to `f`; the result inherits `f`'s parity when the operator
/// commutes with reflection.
pub fn apply(op: &OperatorMatrix, f: &ScalarField) -> Result<ScalarField, GridError> {
    f.check_grid(op.grid())?;
    let parity = if op.is_reflection_symmetric() { f.parity() } else { Parity::None };
    Ok(ScalarField { grid: op.grid().clone(), values: op.apply_values(f.values()), parity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn three_point_grid() {
        let g = make_grid(2.0, 3).unwrap();
        assert_eq!(g.nodes(), &[-1.0, 0.0, 1.0]);
        assert_eq!(g.h(), 1.0);
    }

    #[test]
    fn fine_grid_spacing() {
        let g = make_grid(2.0, 7999).unwrap();
        assert!((g.h() - 5e-4).abs() < 1e-18);
        assert_eq!(g.nodes()[g.mid()], 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(make_grid(1.0, 5), Err(GridError::DomainTooSmall(_))));
        assert!(matches!(make_grid(2.0, 4), Err(GridError::NodeCount(4))));
        assert!(matches!(make_grid(2.0, 1), Err(GridError::NodeCount(1))));
    }

    #[test]
    fn mirror_symmetry_is_bitwise() {
        for n in [3, 5, 101, 2001, 7999] {
            let g = make_grid(2.0, n).unwrap();
            let x = g.nodes();
            for i in 0..n {
                if i != n / 2 {
                    assert_eq!(x[i].to_bits(), (-x[n - 1 - i]).to_bits());
                }
            }
            for w in x.windows(2) {
                assert!(w[1] > w[0]);
            }
        }
    }

    #[test]
    fn free_stencil() {
        let g = make_grid(2.0, 3).unwrap();
        let v = ScalarField::zeros(&g, Parity::Even);
        let op = schrodinger_matrix(&g, 1.0, &v).unwrap();
        assert_eq!(op.diagonal(), &[2.0, 2.0, 2.0]);
        assert_eq!(op.off_diagonal(), -1.0);
    }

    #[test]
    fn trap_stencil() {
        let g = make_grid(2.0, 3).unwrap();
        let v = ScalarField::from_fn(&g, Parity::Even, |x| x * x - 1.0);
        let op = schrodinger_matrix(&g, 1.0, &v).unwrap();
        assert_eq!(op.diagonal(), &[2.0, 1.0, 2.0]);
    }

    #[test]
    fn identity_apply() {
        let g = make_grid(2.0, 11).unwrap();
        let op = OperatorMatrix::new(&g, vec![1.0; 11], 0.0, "id").unwrap();
        let f = ScalarField::from_fn(&g, Parity::None, |x| x.exp());
        assert_eq!(apply(&op, &f).unwrap().values(), f.values());
    }

    #[test]
    fn odd_input_stays_odd() {
        let g = make_grid(2.0, 21).unwrap();
        let v = ScalarField::from_fn(&g, Parity::Even, |x| x * x);
        let op = schrodinger_matrix(&g, 0.3, &v).unwrap();
        let f = ScalarField::from_fn(&g, Parity::Odd, |x| x * (-x * x).exp());
        let r = apply(&op, &f).unwrap();
        assert_eq!(r.parity(), Parity::Odd);
        assert!(r.parity_defect() < 1e-14);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let g = make_grid(2.0, 21).unwrap();
        let g2 = make_grid(2.0, 23).unwrap();
        let v = ScalarField::zeros(&g, Parity::Even);
        let op = schrodinger_matrix(&g, 1.0, &v).unwrap();
        assert!(apply(&op, &ScalarField::zeros(&g2, Parity::Even)).is_err());
        assert!(schrodinger_matrix(&g2, 1.0, &v).is_err());
    }

    #[test]
    fn apply_matches_dense_product() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let g = make_grid(2.0, 51).unwrap();
        let v = ScalarField::from_fn(&g, Parity::Even, |x| x * x - 1.0);
        let op = schrodinger_matrix(&g, 0.2, &v).unwrap();
        let f: Vec<f64> = (0..51).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = 51;
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            dense[(i, i)] = op.diagonal()[i];
            if i + 1 < n {
                dense[(i, i + 1)] = op.off_diagonal();
                dense[(i + 1, i)] = op.off_diagonal();
            }
        }
        let expect = &dense * nalgebra::DVector::from_vec(f.clone());
        let got = op.apply_values(&f);
        for i in 0..n {
            assert!((expect[i] - got[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn second_difference_is_second_order() {
        let x_max = 2.0;
        let err = |n: usize| {
            let g = make_grid(x_max, n).unwrap();
            let k = PI / (2.0 * x_max);
            let f = ScalarField::from_fn(&g, Parity::None, |x| (k * (x + x_max)).sin());
            let op = schrodinger_matrix(&g, 1.0, &ScalarField::zeros(&g, Parity::Even)).unwrap();
            let lf = apply(&op, &f).unwrap();
            // -f'' = k² f analytically.
            g.nodes().iter().zip(lf.values()).map(|(&x, &l)| (l - k * k * (k * (x + x_max)).sin()).abs()).fold(0.0, f64::max)
        };
        let coarse = err(99);
        let fine = err(199);
        let order = (coarse / fine).log2();
        assert!((order - 2.0).abs() < 0.05, "order {order}");
    }

    #[test]
    fn resample_reproduces_linear_functions() {
        let a = make_grid(2.0, 41).unwrap();
        let b = make_grid(2.0, 67).unwrap();
        let f = ScalarField::from_fn(&a, Parity::Odd, |x| x);
        let r = f.resample(&b);
        for (&x, &v) in b.nodes().iter().zip(r.values()) {
            if x.abs() < 2.0 - a.h() {
                assert!((v - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn auto_count_is_odd_and_resolves() {
        for &(xm, hmax) in &[(2.0, 0.05 / 8.0), (2.0, 0.005 / 8.0), (2.0, 0.3 / 8.0), (25.0, 0.01)] {
            let n = auto_node_count(xm, hmax);
            assert_eq!(n % 2, 1);
            assert!(2.0 * xm / (n as f64 + 1.0) <= hmax);
        }
    }
}
