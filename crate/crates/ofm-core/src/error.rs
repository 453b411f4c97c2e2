//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by graph construction, solvers, and the cost engine.
#[derive(Error, Debug)]
pub enum OfmError {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Matrix dimensions do not line up for the requested operation.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A text input (edge list, matrix market file) failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An input matrix that must be symmetric is not.
    #[error("matrix is not symmetric: {0}")]
    NotSymmetric(String),

    /// The dense eigensolver guard: instances above this order are refused.
    #[error("problem size {n} exceeds the dense oracle guard ({guard})")]
    OracleGuard { n: usize, guard: usize },

    /// A factorization hit (numerically) linearly dependent columns.
    #[error("rank deficiency detected: {0}")]
    RankDeficient(String),

    /// The eigensolver failed to reach its off-diagonal tolerance.
    #[error("eigensolver did not converge within {sweeps} sweeps")]
    EigNotConverged { sweeps: usize },

    /// Eigenvalues of a normalized operator fell outside the admissible range.
    #[error("spectrum out of admissible range: eigenvalue {value} outside [{lo}, {hi}]")]
    SpectrumOutOfRange { value: f64, lo: f64, hi: f64 },

    /// The iteration produced a non-finite entry; carries the last finite state.
    #[error("divergence: non-finite iterate at iteration {iteration}")]
    Divergence {
        /// Iteration index at which the first non-finite value appeared.
        iteration: usize,
        /// Last iterate with all entries finite.
        last_finite: Box<crate::driver::OfmResult>,
    },

    /// A cubic with all coefficients zero has no meaningful roots.
    #[error("degenerate cubic: all coefficients are zero")]
    DegenerateCubic,
}

pub type Result<T> = std::result::Result<T, OfmError>;
