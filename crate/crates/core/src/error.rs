use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("angle index {index} out of range for d = {dim} (N = {len})")]
    IndexOutOfRange { index: usize, dim: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value at position {0}")]
    NonFinite(usize),

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(ValidationReport),

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("penalty argument must be nonnegative, got {0}")]
    NegativeArgument(f64),

    #[error("column {column} has zero variance")]
    ZeroVariance { column: usize },

    #[error("objective evaluation failed: {0}")]
    Evaluation(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// One failed check from [`crate::corrspace::validate_corr`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite { row: usize, col: usize },
    Asymmetric { row: usize, col: usize, diff: f64 },
    DiagonalNotUnit { index: usize, value: f64 },
    OutOfRange { row: usize, col: usize, value: f64 },
    NotPositiveDefinite { min_eigenvalue: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::NonFinite { row, col } => write!(f, "entry ({row},{col}) is not finite"),
            Violation::Asymmetric { row, col, diff } => {
                write!(f, "entries ({row},{col}) and ({col},{row}) differ by {diff:e}")
            }
            Violation::DiagonalNotUnit { index, value } => {
                write!(f, "diagonal entry {index} is {value}, expected 1")
            }
            Violation::OutOfRange { row, col, value } => {
                write!(f, "entry ({row},{col}) = {value} lies outside [-1, 1]")
            }
            Violation::NotPositiveDefinite { min_eigenvalue } => {
                write!(f, "smallest eigenvalue {min_eigenvalue:e} is not above tolerance")
            }
        }
    }
}

/// Every invariant a candidate correlation matrix violated.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
