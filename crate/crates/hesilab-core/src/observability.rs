//! Time-domain stabilizability criteria: control Gramians, weak
//! observability constants, and the multiplier bound tying them back to
//! the frequency-domain constants.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};
use crate::operator::{ControlSystem, SemigroupBounds};
use crate::tol;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

/// Default seed for the sampled checks; recorded in every report.
pub const DEFAULT_SAMPLE_SEED: u64 = 7;

/// Finite-horizon control Gramian `G(T) = int_0^T e^{As} B B* e^{A*s} ds`.
#[derive(Debug, Clone)]
pub struct GramianResult {
    pub horizon: f64,
    pub g: CMat,
    /// Worst relative discrepancy between the augmented-exponential value
    /// and composite Gauss quadrature of the quadratic form, together with
    /// the quadrature's own 64-vs-128 panel difference.
    pub quadrature_error_estimate: f64,
}

/// 4-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 4] = [
    -0.8611363115940526,
    -0.33998104358485626,
    0.33998104358485626,
    0.8611363115940526,
];
const GL_WEIGHTS: [f64; 4] = [
    0.34785484513745385,
    0.6521451548625461,
    0.6521451548625461,
    0.34785484513745385,
];

/// `int_0^tau ||B* e^{A*t} phi||^2 dt` by composite Gauss quadrature.
pub fn observation_energy(
    sys: &ControlSystem,
    phi: &CVec,
    tau: f64,
    panels: usize,
) -> Result<f64> {
    let pair = sys.adjoint_pair();
    let h = tau / panels.max(1) as f64;
    let mut total = 0.0;
    for p in 0..panels.max(1) {
        let mid = (p as f64 + 0.5) * h;
        for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            let t = mid + 0.5 * h * node;
            let v = pair.semigroup_apply(t, phi)?;
            let bv = &pair.b_star * &v;
            total += 0.5 * h * weight * bv.norm_squared();
        }
    }
    Ok(total)
}

fn probe_vectors(n: usize) -> Vec<CVec> {
    let uniform = CVec::from_fn(n, |_, _| C64::new(1.0, 0.0)) / C64::new((n as f64).sqrt(), 0.0);
    let mixed = {
        let mut v = CVec::from_fn(n, |i, _| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            C64::new(s, 0.3 * (i as f64 + 1.0))
        });
        let norm = v.norm();
        v /= C64::new(norm, 0.0);
        v
    };
    vec![uniform, mixed]
}

/// Gramian by the augmented exponential: with
/// `F = exp(T [[A, BB*], [0, -A*]])` the top-right block satisfies
/// `F12 = int_0^T e^{A(T-s)} BB* e^{-A*s} ds`, so `G(T) = F12 F11^H`.
pub fn control_gramian(sys: &ControlSystem, horizon: f64) -> Result<GramianResult> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "gramian horizon must be positive and finite, got {horizon}"
        )));
    }
    let (_, g) = semigroup_and_gramian(sys, horizon)?;
    // cross-check the quadratic form against direct quadrature
    let mut worst = 0.0f64;
    for phi in probe_vectors(sys.n()) {
        let form = (phi.adjoint() * &g * &phi)[(0, 0)].re;
        let q128 = observation_energy(sys, &phi, horizon, 128)?;
        let q64 = observation_energy(sys, &phi, horizon, 64)?;
        let denom = form.abs().max(q128.abs()).max(1e-300);
        worst = worst
            .max((form - q128).abs() / denom)
            .max((q128 - q64).abs() / denom);
    }
    Ok(GramianResult {
        horizon,
        g,
        quadrature_error_estimate: worst,
    })
}

/// Returns `(e^{AT}, G(T))` from one augmented exponential.
fn semigroup_and_gramian(sys: &ControlSystem, horizon: f64) -> Result<(CMat, CMat)> {
    let n = sys.n();
    let bbs = sys.b() * sys.b().adjoint();
    let a_star = sys.a().adjoint();
    let mut aug = CMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = sys.a()[(i, j)];
            aug[(i, n + j)] = bbs[(i, j)];
            aug[(n + i, n + j)] = -a_star[(i, j)];
        }
    }
    let f = linalg::expm(&(aug * C64::new(horizon, 0.0)))?;
    if !linalg::all_finite(&f) {
        return Err(Error::NonFinite("augmented gramian exponential"));
    }
    let f11 = f.view((0, 0), (n, n)).into_owned();
    let f12 = f.view((0, n), (n, n)).into_owned();
    let g = &f12 * f11.adjoint();
    if !linalg::all_finite(&g) {
        return Err(Error::NonFinite("gramian product"));
    }
    Ok((f11, linalg::hermitian_part(&g)))
}

/// Smallest `C` with `e^{AT} e^{A*T} <= C G(T) + delta I` in the quadratic
/// form order, or `+inf` when no finite `C` works (the shifted form stays
/// positive on the kernel of the Gramian).
pub fn weak_obs_min_c(sys: &ControlSystem, horizon: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    let (f11, g) = semigroup_and_gramian(sys, horizon)?;
    let m = &f11 * f11.adjoint();
    if !linalg::all_finite(&m) {
        return Err(Error::NonFinite("semigroup gram matrix"));
    }
    let mut n_mat = m.clone();
    for i in 0..sys.n() {
        n_mat[(i, i)] -= C64::new(delta, 0.0);
    }

    let (gvals, gvecs) = linalg::hermitian_eigen(&g);
    let gmax = gvals.last().copied().unwrap_or(0.0).max(0.0);
    let cut = tol::PENCIL_REL_TOL * gmax;
    let range_idx: Vec<usize> = (0..sys.n()).filter(|&i| gvals[i] > cut).collect();
    let kernel_idx: Vec<usize> = (0..sys.n()).filter(|&i| gvals[i] <= cut).collect();

    let m_norm = linalg::spectral_norm(&m);
    if !kernel_idx.is_empty() {
        let mut pk = CMat::zeros(sys.n(), kernel_idx.len());
        for (col, &i) in kernel_idx.iter().enumerate() {
            pk.set_column(col, &gvecs.column(i));
        }
        let nk = pk.adjoint() * &n_mat * &pk;
        let (kvals, _) = linalg::hermitian_eigen(&nk);
        let kmax = kvals.last().copied().unwrap_or(0.0);
        if kmax > tol::PENCIL_REL_TOL * (1.0 + m_norm) {
            return Ok(f64::INFINITY);
        }
    }
    if range_idx.is_empty() {
        return Ok(0.0);
    }
    let mut pr = CMat::zeros(sys.n(), range_idx.len());
    for (col, &i) in range_idx.iter().enumerate() {
        pr.set_column(col, &gvecs.column(i));
    }
    let mut s = pr.adjoint() * &n_mat * &pr;
    for (row, &i) in range_idx.iter().enumerate() {
        let wi = 1.0 / gvals[i].sqrt();
        for (col, &j) in range_idx.iter().enumerate() {
            s[(row, col)] *= C64::new(wi / gvals[j].sqrt(), 0.0);
        }
    }
    let (svals, _) = linalg::hermitian_eigen(&s);
    Ok(svals.last().copied().unwrap_or(0.0).max(0.0))
}

/// Minimal `C(t)` with `e^{At} e^{A*t} <= C (G(t) + e^{-alpha t} I)` per
/// grid time; a bounded profile certifies stabilizability at rate `alpha`.
pub fn weak_obs_decay_profile(
    sys: &ControlSystem,
    alpha: f64,
    t_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "decay rate must be positive, got {alpha}"
        )));
    }
    t_grid
        .par_iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Ok((t, 1.0));
            }
            let (f11, g) = semigroup_and_gramian(sys, t)?;
            let m = &f11 * f11.adjoint();
            let mut shifted = g;
            let floor = (-alpha * t).exp();
            for i in 0..sys.n() {
                shifted[(i, i)] += C64::new(floor, 0.0);
            }
            // shifted is positive definite, so the pencil reduces directly
            let (gvals, gvecs) = linalg::hermitian_eigen(&shifted);
            let mut s = gvecs.adjoint() * &m * &gvecs;
            for row in 0..sys.n() {
                let wi = 1.0 / gvals[row].max(1e-300).sqrt();
                for col in 0..sys.n() {
                    s[(row, col)] *= C64::new(wi / gvals[col].max(1e-300).sqrt(), 0.0);
                }
            }
            let (svals, _) = linalg::hermitian_eigen(&s);
            Ok((t, svals.last().copied().unwrap_or(0.0).max(0.0)))
        })
        .collect()
}

/// Sampled verification of the multiplier estimate that converts a flat
/// half-plane constant into a weak observability inequality:
/// `||e^{A* tau} phi||^2 <= 4 tau^-1 beta^-2 C_flat C_A^2 E(phi)
///   + 4 tau^-2 beta^-2 C_flat pi^2 C_A^4 ||phi||^2`
/// with `E(phi)` the observation energy over `[0, tau]`.
#[derive(Debug, Clone)]
pub struct MultiplierReport {
    pub tau: f64,
    pub beta: f64,
    pub hesi_c: f64,
    pub c_uniform: f64,
    pub draws: usize,
    pub seed: u64,
    /// Smallest `rhs - lhs` over the draws; negative means violation.
    pub worst_slack: f64,
    pub worst_lhs: f64,
    pub worst_rhs: f64,
    pub ok: bool,
}

pub fn multiplier_bound_check(
    sys: &ControlSystem,
    tau: f64,
    beta: f64,
    hesi_c: f64,
    bounds: &SemigroupBounds,
) -> Result<MultiplierReport> {
    multiplier_bound_check_seeded(sys, tau, beta, hesi_c, bounds, 64, DEFAULT_SAMPLE_SEED)
}

pub fn multiplier_bound_check_seeded(
    sys: &ControlSystem,
    tau: f64,
    beta: f64,
    hesi_c: f64,
    bounds: &SemigroupBounds,
    draws: usize,
    seed: u64,
) -> Result<MultiplierReport> {
    if !(tau > 0.0) || !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tau and beta must be positive, got tau={tau} beta={beta}"
        )));
    }
    let c_a = bounds.c_uniform.ok_or_else(|| {
        Error::InvalidParameter(
            "multiplier bound needs a uniformly bounded adjoint semigroup (c_uniform unset)"
                .into(),
        )
    })?;
    let pair = sys.adjoint_pair();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let phis: Vec<CVec> = (0..draws.max(1))
        .map(|_| {
            let mut v = CVec::from_fn(sys.n(), |_, _| {
                C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let norm = v.norm();
            if norm > 0.0 {
                v /= C64::new(norm, 0.0);
            }
            v
        })
        .collect();

    let coef = 4.0 * hesi_c / (beta * beta);
    let constant_term = coef / (tau * tau) * std::f64::consts::PI.powi(2) * c_a.powi(4);
    let energy_coef = coef / tau * c_a * c_a;

    let evaluated: Vec<Result<(f64, f64)>> = phis
        .par_iter()
        .map(|phi| {
            let lhs = pair.semigroup_apply(tau, phi)?.norm_squared();
            let energy = observation_energy(sys, phi, tau, 128)?;
            Ok((lhs, energy_coef * energy + constant_term))
        })
        .collect();

    let mut worst_slack = f64::INFINITY;
    let mut worst_lhs = 0.0;
    let mut worst_rhs = 0.0;
    for item in evaluated {
        let (lhs, rhs) = item?;
        if rhs - lhs < worst_slack {
            worst_slack = rhs - lhs;
            worst_lhs = lhs;
            worst_rhs = rhs;
        }
    }
    let quad_tol = 1e-8 * (1.0 + worst_rhs.abs());
    Ok(MultiplierReport {
        tau,
        beta,
        hesi_c,
        c_uniform: c_a,
        draws: draws.max(1),
        seed,
        worst_slack,
        worst_lhs,
        worst_rhs,
        ok: worst_slack >= -quad_tol,
    })
}
