use std::fmt;
use std::process::ExitCode;

use serde::Serialize;
use tfx::error::{AnsatzError, EquilibriumError, IoError, SolverError, SpectrumError};

/// Why a command stopped, mapped onto the process exit status.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Failure {
    Usage { message: String },
    /// Newton converged, but to the wrong solution branch.
    Basin { message: String, expected_zeros: Option<usize>, found_zeros: Option<usize> },
    Convergence { message: String },
    Io { message: String },
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure::Usage { message: message.into() }
    }

    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage { .. } => 2,
            Failure::Basin { .. } => 3,
            Failure::Convergence { .. } => 4,
            Failure::Io { .. } => 5,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code())
    }

    /// Solver failures get a diagnostic file; usage and I/O errors do not.
    pub fn wants_diagnostic(&self) -> bool {
        matches!(self, Failure::Basin { .. } | Failure::Convergence { .. })
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage { message } | Failure::Convergence { message } | Failure::Io { message } => message,
            Failure::Basin { message, .. } => message,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.message())
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        let message = e.to_string();
        match e {
            SolverError::Invalid(_) | SolverError::Grid(_) => Failure::Usage { message },
            SolverError::WrongZeroCount { expected, found, .. } => {
                Failure::Basin { message, expected_zeros: Some(expected), found_zeros: Some(found) }
            }
            SolverError::NotPositive { .. } => Failure::Basin { message, expected_zeros: Some(0), found_zeros: None },
            SolverError::Newton(_) | SolverError::Linalg(_) => Failure::Convergence { message },
        }
    }
}

impl From<SpectrumError> for Failure {
    fn from(e: SpectrumError) -> Self {
        let message = e.to_string();
        match e {
            SpectrumError::Invalid(_) | SpectrumError::NotOdd(_) | SpectrumError::Grid(_) => Failure::Usage { message },
            SpectrumError::Linalg(_) => Failure::Convergence { message },
        }
    }
}

impl From<EquilibriumError> for Failure {
    fn from(e: EquilibriumError) -> Self {
        let message = e.to_string();
        match e {
            EquilibriumError::OutOfRange(_) | EquilibriumError::Unordered => Failure::Usage { message },
            EquilibriumError::Diverged(_) => Failure::Convergence { message },
        }
    }
}

impl From<AnsatzError> for Failure {
    fn from(e: AnsatzError) -> Self {
        let message = e.to_string();
        match e {
            AnsatzError::Newton(_) => Failure::Convergence { message },
            _ => Failure::Usage { message },
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Io { message: e.to_string() }
    }
}

impl From<tfx::error::AnalysisError> for Failure {
    fn from(e: tfx::error::AnalysisError) -> Self {
        Failure::Convergence { message: e.to_string() }
    }
}
