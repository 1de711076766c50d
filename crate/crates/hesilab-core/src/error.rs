//! Error type shared across the analysis modules.

/// Failures surfaced by the analysis routines.
///
/// Verdicts ("not stabilizable") are not errors; they are reported through
/// the result structs. Errors mean the computation itself could not be
/// carried out or its preconditions were violated.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix exponential overflow: ||A t|| = {norm:.3e} exceeds cap {cap:.3e}")]
    ExpOverflow { norm: f64, cap: f64 },

    #[error("eigenvalue iteration failed to converge")]
    EigConvergence,

    #[error("singular linear solve in {0}")]
    SingularSolve(&'static str),

    #[error("system is not stabilizable: {0}")]
    NotStabilizable(String),

    #[error("Riccati pencil has eigenvalues within {tol:.1e} of the imaginary axis; the problem is marginal")]
    MarginalRiccati { tol: f64 },

    #[error("iterative eigenvalue estimate did not converge within {iters} iterations")]
    IterationLimit { iters: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
