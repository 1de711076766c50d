//! Heat equation on (0, 1) with Dirichlet ends, potential shift `c`, and a
//! point actuator at `x0`. In the sine eigenbasis the state operator is
//! `diag(-(n pi)^2 + c)` and the actuator couples to mode `n` through
//! `sqrt(2) sin(n pi x0)`, so stabilizability hinges on which of those
//! coefficients vanish exactly. Zeros happen precisely at rational `x0`
//! with small denominator, which is why the position is taken as an exact
//! rational (or an explicit irrationality assertion) rather than a float.

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::operator::ControlSystem;

/// Reduced fraction `p/q` strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RationalPoint {
    p: u64,
    q: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl RationalPoint {
    pub fn new(p: u64, q: u64) -> Result<Self> {
        if q == 0 || p == 0 || p >= q {
            return Err(Error::InvalidParameter(format!(
                "actuator position {p}/{q} must lie strictly inside (0, 1)"
            )));
        }
        let g = gcd(p, q);
        Ok(Self { p: p / g, q: q / g })
    }

    pub fn numerator(&self) -> u64 {
        self.p
    }

    pub fn denominator(&self) -> u64 {
        self.q
    }

    pub fn value(&self) -> f64 {
        self.p as f64 / self.q as f64
    }
}

/// Actuator position: exact rational, or a declared-irrational value used
/// for simulation. The stabilizability verdict is discontinuous in `x0`,
/// so a bare float never feeds the criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObservationPoint {
    Rational(RationalPoint),
    Irrational(f64),
}

impl ObservationPoint {
    pub fn rational(p: u64, q: u64) -> Result<Self> {
        Ok(Self::Rational(RationalPoint::new(p, q)?))
    }

    pub fn value(&self) -> f64 {
        match self {
            Self::Rational(r) => r.value(),
            Self::Irrational(v) => *v,
        }
    }
}

/// Number of eigenvalues at or above zero: `n* = floor(sqrt(c)/pi)`.
pub fn unstable_mode_count(c: f64) -> u64 {
    if c <= 0.0 {
        return 0;
    }
    (c.sqrt() / std::f64::consts::PI).floor() as u64
}

/// Stabilizability of the point-actuated heat equation: fails exactly when
/// `x0 = p/q` in lowest terms with `q <= floor(sqrt(c)/pi)`, because mode
/// `q` is then unstable yet invisible to the actuator.
pub fn pointwise_criterion(c: f64, x0: &ObservationPoint) -> Result<bool> {
    let pi_sq = std::f64::consts::PI * std::f64::consts::PI;
    if !(c > pi_sq) {
        return Err(Error::InvalidParameter(format!(
            "criterion needs at least one unstable mode, so c > pi^2; got {c}"
        )));
    }
    match x0 {
        ObservationPoint::Irrational(_) => Ok(true),
        ObservationPoint::Rational(r) => Ok(r.q > unstable_mode_count(c)),
    }
}

/// Sine-basis truncation with `n_modes` modes. The coefficient
/// `sqrt(2) sin(n pi p / q)` is set to an exact zero whenever `q` divides
/// `n p` (integer arithmetic, no rounding), and the remaining angles are
/// reduced modulo `2 q` before the floating sine so large `n` costs no
/// precision.
pub fn pointwise_heat_system(
    c: f64,
    x0: &ObservationPoint,
    n_modes: usize,
) -> Result<ControlSystem> {
    if !c.is_finite() {
        return Err(Error::NonFinite("potential coefficient"));
    }
    let n_star = unstable_mode_count(c) as usize;
    if n_modes < n_star + 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least {} modes to cover the unstable spectrum, got {n_modes}",
            n_star + 2
        )));
    }
    if let ObservationPoint::Irrational(v) = x0 {
        if !(*v > 0.0 && *v < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "actuator position must lie in (0, 1), got {v}"
            )));
        }
    }
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut eig = Vec::with_capacity(n_modes);
    let mut coef = Vec::with_capacity(n_modes);
    for n in 1..=n_modes as u64 {
        let npi = n as f64 * std::f64::consts::PI;
        eig.push(C64::new(-npi * npi + c, 0.0));
        let b_n = match x0 {
            ObservationPoint::Irrational(v) => sqrt2 * (npi * v).sin(),
            ObservationPoint::Rational(r) => {
                if (n * r.p) % r.q == 0 {
                    0.0
                } else {
                    let reduced = (n * r.p) % (2 * r.q);
                    sqrt2 * (std::f64::consts::PI * reduced as f64 / r.q as f64).sin()
                }
            }
        };
        coef.push(C64::new(b_n, 0.0));
    }
    let a = CMat::from_diagonal(&CVec::from_vec(eig));
    let b = CMat::from_vec(n_modes, 1, coef.clone());
    let b_norm: f64 = coef.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let label = match x0 {
        ObservationPoint::Rational(r) => format!(
            "pointwise-heat c={c} x0={}/{} modes={n_modes} |b|={b_norm:.4}",
            r.p, r.q
        ),
        ObservationPoint::Irrational(v) => {
            format!("pointwise-heat c={c} x0~{v} modes={n_modes} |b|={b_norm:.4}")
        }
    };
    ControlSystem::new(a, b, &label)
}
