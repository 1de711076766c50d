//! Stabilizability analysis for finite-dimensional control pairs `(A, B)`.
//!
//! The toolkit decides and quantifies exponential stabilizability of
//! `y' = Ay + Bu` along three interchangeable routes:
//!
//! * resolvent margins: the smallest singular value of the stacked matrix
//!   `[(lambda I - A*); B*]` swept over a right half-plane, producing the
//!   decay-weighted constant `sup (Re lambda + beta)^2 / margin(lambda)^2`
//!   and its flat (unweighted) variant,
//! * weak observability: `||e^{A* T} phi||^2 <= C ( int_0^T ||B* e^{A* s} phi||^2 ds
//!   + delta ||phi||^2 )` with `delta < 1`, evaluated through control Gramians,
//! * LQ synthesis: the algebraic Riccati equation, stabilizing and
//!   rapid (prescribed-decay) feedback, and Laplace-domain witnesses.
//!
//! The `models` module builds several benchmark truncations on periodic
//! domains (Ginzburg-Landau, fractional heat, pointwise control, heat with
//! delayed self-coupling) whose structure the analysis modules exploit.

pub mod error;
pub mod hautus;
pub mod linalg;
pub mod models;
pub mod observability;
pub mod operator;
pub mod synthesis;
pub mod tol;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
pub use operator::{AdjointPair, ControlSystem, KalmanDecomposition, SemigroupBounds};
