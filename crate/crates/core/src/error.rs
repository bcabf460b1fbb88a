use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("node count must be odd and at least 3, got {0}")]
    NodeCount(usize),
    #[error("half-width must be positive and finite, got {0}")]
    HalfWidth(f64),
    #[error("x_max must exceed 1 so the domain contains the Thomas-Fermi support, got {0}")]
    DomainTooSmall(f64),
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("fields live on different grids")]
    GridMismatch,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("singular tridiagonal system at row {0}")]
    Singular(usize),
    #[error("requested {requested} eigenpairs from a {n}x{n} operator")]
    TooManyEigenpairs { requested: usize, n: usize },
    #[error("inverse iteration did not converge for eigenvalue {0}")]
    InverseIteration(f64),
}

/// Newton failure with the sup-norm residual after every accepted iterate.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{context}: Newton stalled after {iterations} iterations (residual {last:.3e})")]
pub struct NewtonFailure {
    pub context: String,
    pub iterations: usize,
    pub last: f64,
    pub history: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnsatzError {
    #[error("soliton positions must be strictly increasing")]
    UnorderedPositions,
    #[error("Painleve domain [{y_min}, {y_max}] must satisfy y_min <= -10 and y_max >= 10")]
    PainleveDomain { y_min: f64, y_max: f64 },
    #[error(transparent)]
    Newton(#[from] NewtonFailure),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Newton(#[from] NewtonFailure),
    #[error("converged to a state with {found} zeros, expected {expected}")]
    WrongZeroCount { expected: usize, found: usize, state: Box<crate::gpe::StationaryState> },
    #[error("ground state has a non-positive value {value:e} at x = {x}")]
    NotPositive { x: f64, value: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("input function is not odd (defect {0:e})")]
    NotOdd(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EquilibriumError {
    #[error("eps = {0} outside the range where the asymptotic formula is defined (0 < eps < 1/e)")]
    OutOfRange(f64),
    #[error("positions must be strictly increasing")]
    Unordered,
    #[error("{0}")]
    Diverged(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("rate fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("rate fit needs positive values and eps, got ({eps}, {value})")]
    NonPositive { eps: f64, value: f64 },
    #[error("duplicate eps value {0} in rate fit")]
    DuplicateEps(f64),
    #[error("compact set [{0}, {1}] must lie strictly inside (-1, 1)")]
    CompactSet(f64, f64),
    #[error("sweep needs at least 3 converged states, got {0}")]
    InsufficientSweep(usize),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IoError {
    #[error("{path}: {message}")]
    File { path: String, message: String },
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("unsupported schema {found:?}, expected {expected:?}")]
    Schema { found: String, expected: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid list entry {0:?}")]
    ListEntry(String),
    #[error("stored state fails re-verification: residual {residual:.3e} above {tol:.1e}")]
    Verification { residual: f64, tol: f64 },
    #[error("record inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl IoError {
    pub fn file(path: &std::path::Path, err: std::io::Error) -> Self {
        IoError::File { path: path.display().to_string(), message: err.to_string() }
    }
}
