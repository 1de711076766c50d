//! Centralized numerical tolerances.
//!
//! Every rank cut, classification threshold, and acceptance band in the
//! crate routes through these constants so that a tolerance change is a
//! one-line edit with a visible blast radius.

/// Relative rank cut for SVD-based subspace extraction: singular values
/// `sigma <= RANK_REL_TOL * sigma_max` are treated as zero.
pub const RANK_REL_TOL: f64 = 1e-10;

/// Relative kernel split for the Gramian pencil in the weak observability
/// quotient, measured against `||G||`.
pub const PENCIL_REL_TOL: f64 = 1e-10;

/// Eigenvalues with `Re lambda >= -EIG_CLASSIFY_RE` count as unstable when
/// classifying spectra (Hautus scans, decay rates, model verdicts).
pub const EIG_CLASSIFY_RE: f64 = 1e-10;

/// A stacked margin at or below `MARGIN_SENTINEL_REL * ||A||_F` is treated
/// as an exact zero and the half-plane constant reported as infinite.
pub const MARGIN_SENTINEL_REL: f64 = 1e-12;

/// Hamiltonian eigenvalues within this distance of the imaginary axis make
/// the Riccati problem marginal and abort the solve.
pub const RICCATI_AXIS_TOL: f64 = 1e-10;

/// Accepted relative Riccati residual: `||A*P + PA - PBB*P + Q||_F`
/// must not exceed `RICCATI_RESIDUAL_REL * (1 + ||P||_F^2)`.
pub const RICCATI_RESIDUAL_REL: f64 = 1e-8;

/// Normality defect threshold: `||AA* - A*A||_F <= NORMALITY_REL_TOL * ||A||_F^2`.
pub const NORMALITY_REL_TOL: f64 = 1e-12;

/// Default cap on `||A|| * t` before the matrix exponential refuses to run.
pub const EXP_NORM_CAP: f64 = 200.0;

/// Relative convergence target for iterative extreme-eigenvalue estimates.
pub const LANCZOS_REL_TOL: f64 = 1e-11;

/// Default offset of the search rectangle from the half-plane boundary
/// `Re lambda = -beta`, scaled by `(1 + beta)`.
pub const BOUNDARY_OFFSET_SCALE: f64 = 1e-6;
