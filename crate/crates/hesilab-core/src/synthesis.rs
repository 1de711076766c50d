//! Feedback synthesis and certification: LQ Riccati gains, decay-rate
//! constants for the closed loop, rapid stabilization by spectral shift,
//! the optimal decay rate of the uncontrollable part, and the resolvent
//! witness identity tying trajectories to half-plane bounds.

use crate::error::{Error, Result};
use crate::hautus::hsf_test;
use crate::linalg::{self, CMat, CVec, C64};
use crate::operator::{default_time_grid, kalman_decompose, ControlSystem};
use crate::tol;
use rayon::prelude::*;

/// Stabilizing solution of `A*P + PA - P BB* P + Q = 0`.
#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub p: CMat,
    /// Frobenius norm of the Riccati residual at the returned `P`.
    pub residual: f64,
    pub q: CMat,
}

/// A feedback gain with its certification data.
#[derive(Debug, Clone)]
pub struct FeedbackReport {
    pub k: CMat,
    /// Achieved decay rate: minus the spectral abscissa of `A + BK`.
    pub alpha: f64,
    /// Sampled bound: `||e^{(A+BK)t}|| <= c1 e^{-alpha t}` on the time grid.
    pub c1: f64,
    /// Control energy constant: `c2^2` is the largest eigenvalue of the
    /// closed-loop observability Gramian of the gain.
    pub c2: f64,
    pub certified: bool,
}

/// Solve `A^H W + W A + RHS = 0` for Hermitian `W`; requires the spectra of
/// `A^H` and `-A` to be disjoint (holds for stable `A`). Schur form plus
/// column back-substitution.
pub fn lyapunov_adjoint(a: &CMat, rhs: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let (q, t) = linalg::schur(a)?;
    let c = q.adjoint() * rhs * &q;
    let mut w = CMat::zeros(n, n);
    for j in 0..n {
        let mut col_rhs = -c.column(j).into_owned();
        for k in 0..j {
            let coef = t[(k, j)];
            col_rhs -= w.column(k) * coef;
        }
        let tjj = t[(j, j)];
        let mut col = CVec::zeros(n);
        for i in 0..n {
            let mut s = col_rhs[i];
            for k in 0..i {
                s -= t[(k, i)].conj() * col[k];
            }
            let d = t[(i, i)].conj() + tjj;
            if d.norm() < 1e-300 {
                return Err(Error::SingularSolve("lyapunov diagonal vanished"));
            }
            col[i] = s / d;
        }
        w.set_column(j, &col);
    }
    let w = &q * w * q.adjoint();
    Ok(linalg::hermitian_part(&w))
}

/// LQ Riccati with identity state and control weights.
pub fn solve_lq_riccati(sys: &ControlSystem) -> Result<RiccatiSolution> {
    solve_lq_riccati_weighted(sys, &CMat::identity(sys.n(), sys.n()))
}

/// LQ Riccati with an explicit Hermitian PSD state weight.
///
/// Route: Schur form of the Hamiltonian `[[A, -BB*], [-Q, -A*]]`, reorder
/// the stable eigenvalues to the front, and read `P` off the invariant
/// subspace basis `[U1; U2]` as `U2 U1^{-1}`.
pub fn solve_lq_riccati_weighted(sys: &ControlSystem, q_weight: &CMat) -> Result<RiccatiSolution> {
    let n = sys.n();
    if q_weight.nrows() != n || q_weight.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "state weight is {}x{}, system dimension is {n}",
            q_weight.nrows(),
            q_weight.ncols()
        )));
    }
    let hsf = hsf_test(sys)?;
    if !hsf.stabilizable {
        let lambdas: Vec<String> = hsf
            .offenders
            .iter()
            .map(|o| format!("{:.6}{:+.6}i", o.lambda.re, o.lambda.im))
            .collect();
        return Err(Error::NotStabilizable(format!(
            "control cannot reach the unstable eigenvalue(s) {}",
            lambdas.join(", ")
        )));
    }

    let bbs = sys.b() * sys.b().adjoint();
    let a_star = sys.a().adjoint();
    let mut ham = CMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            ham[(i, j)] = sys.a()[(i, j)];
            ham[(i, n + j)] = -bbs[(i, j)];
            ham[(n + i, j)] = -q_weight[(i, j)];
            ham[(n + i, n + j)] = -a_star[(i, j)];
        }
    }
    let axis_tol = tol::RICCATI_AXIS_TOL * (1.0 + ham.norm());
    let (mut qm, mut tm) = linalg::schur(&ham)?;
    let eigs: Vec<C64> = (0..2 * n).map(|i| tm[(i, i)]).collect();
    if eigs.iter().any(|z| z.re.abs() <= axis_tol) {
        return Err(Error::MarginalRiccati { tol: axis_tol });
    }
    let select: Vec<bool> = eigs.iter().map(|z| z.re < 0.0).collect();
    let stable = linalg::reorder_schur(&mut qm, &mut tm, &select);
    if stable != n {
        return Err(Error::EigConvergence);
    }
    let u1 = qm.view((0, 0), (n, n)).into_owned();
    let u2 = qm.view((n, 0), (n, n)).into_owned();
    // P U1 = U2, solved through the transposed system
    let pt = linalg::solve_mat(&u1.transpose(), &u2.transpose(), "riccati subspace basis")?;
    let p = linalg::hermitian_part(&pt.transpose());

    let residual_mat = &a_star * &p + &p * sys.a() - &p * &bbs * &p + q_weight;
    let residual = residual_mat.norm();
    let p_sq = p.norm() * p.norm();
    if residual > tol::RICCATI_RESIDUAL_REL * (1.0 + p_sq) {
        return Err(Error::SingularSolve("riccati residual above certification bound"));
    }
    let closed = sys.a() - &bbs * &p;
    if linalg::spectral_abscissa(&closed)? >= 0.0 {
        return Err(Error::MarginalRiccati { tol: axis_tol });
    }
    Ok(RiccatiSolution {
        p,
        residual,
        q: q_weight.clone(),
    })
}

/// Assemble the certification data for the gain `K = -B*P`.
fn feedback_from_gain(sys: &ControlSystem, k: CMat) -> Result<FeedbackReport> {
    let a_cl = sys.a() + sys.b() * &k;
    let alpha = -linalg::spectral_abscissa(&a_cl)?;
    let mut c1 = 0.0f64;
    for &t in default_time_grid().iter() {
        let e = linalg::expm(&(&a_cl * C64::new(t, 0.0)))?;
        c1 = c1.max(linalg::spectral_norm(&e) * (alpha * t).exp());
    }
    let c2 = if sys.m() == 0 || alpha <= 0.0 {
        0.0
    } else {
        let w = lyapunov_adjoint(&a_cl, &(k.adjoint() * &k))?;
        let (vals, _) = linalg::hermitian_eigen(&w);
        vals.last().copied().unwrap_or(0.0).max(0.0).sqrt()
    };
    Ok(FeedbackReport {
        k,
        alpha,
        c1,
        c2,
        certified: alpha > 0.0,
    })
}

/// LQ feedback `K = -B*P` with decay, semigroup, and control-energy
/// constants for the closed loop.
pub fn stabilizing_feedback(sys: &ControlSystem) -> Result<FeedbackReport> {
    let sol = solve_lq_riccati(sys)?;
    let k = -(sys.b().adjoint() * &sol.p);
    feedback_from_gain(sys, k)
}

/// Feedback with decay rate at least `alpha_target`: LQ synthesis on the
/// shifted generator `A + alpha I`, certified against the original system.
pub fn rapid_feedback(sys: &ControlSystem, alpha_target: f64) -> Result<FeedbackReport> {
    if !(alpha_target > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "target decay rate must be positive, got {alpha_target}"
        )));
    }
    let mut shifted_a = sys.a().clone();
    for i in 0..sys.n() {
        shifted_a[(i, i)] += C64::new(alpha_target, 0.0);
    }
    let shifted = ControlSystem::new(shifted_a, sys.b().clone(), sys.label())?;
    let sol = solve_lq_riccati(&shifted).map_err(|e| match e {
        Error::NotStabilizable(msg) => Error::NotStabilizable(format!(
            "not stabilizable at rate {alpha_target}: {msg}"
        )),
        other => other,
    })?;
    let k = -(shifted.b().adjoint() * &sol.p);
    let mut report = feedback_from_gain(sys, k)?;
    report.certified = report.alpha >= alpha_target - 1e-8;
    Ok(report)
}

/// Best decay rate any feedback can reach: the uncontrollable part fixes
/// the ceiling `sigma_sharp = -max Re sigma(A3)` (infinite for controllable
/// pairs). `reachable` is false when an eigenvalue attaining the ceiling is
/// defective inside the uncontrollable block.
pub fn optimal_decay_rate(sys: &ControlSystem) -> Result<(f64, bool)> {
    let dec = kalman_decompose(sys)?;
    let n3 = sys.n() - dec.nc;
    if n3 == 0 {
        return Ok((f64::INFINITY, true));
    }
    let eigs = linalg::eigenvalues(&dec.a3)?;
    let scale = dec.a3.norm().max(1.0);
    let s_max = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let at_max: Vec<C64> = eigs
        .iter()
        .copied()
        .filter(|z| z.re >= s_max - 1e-8 * scale)
        .collect();
    // cluster the attaining eigenvalues and compare multiplicities
    let cluster_tol = 1e-6 * scale;
    let mut reps: Vec<(C64, usize)> = Vec::new();
    for z in at_max {
        match reps.iter_mut().find(|(r, _)| (*r - z).norm() <= cluster_tol) {
            Some((_, count)) => *count += 1,
            None => reps.push((z, 1)),
        }
    }
    let mut reachable = true;
    for (lambda, algebraic) in reps {
        let mut m = -dec.a3.clone();
        for i in 0..n3 {
            m[(i, i)] += lambda;
        }
        let sv = linalg::singular_values(&m);
        let smax = sv.first().copied().unwrap_or(0.0).max(1e-300);
        let geometric = sv.iter().filter(|&&s| s <= 1e-7 * smax).count();
        if geometric < algebraic {
            reachable = false;
        }
    }
    Ok((-s_max, reachable))
}

/// One resolvent witness: `xi = (lambda I - A - BK)^{-1} y0`,
/// `eta = -K xi`, satisfying `(lambda I - A) xi + B eta = y0`.
#[derive(Debug, Clone)]
pub struct LaplaceWitness {
    pub lambda: C64,
    pub xi: CVec,
    pub eta: CVec,
    pub residual: f64,
}

/// Witness family over a half-plane grid with the fitted constants.
#[derive(Debug, Clone)]
pub struct LaplaceCheck {
    pub witnesses: Vec<LaplaceWitness>,
    /// Smallest `C` with `||xi(lambda)|| <= C ||y0|| / (Re lambda + beta)`
    /// over the grid.
    pub c_beta: f64,
    /// Smallest `D` with `||eta(lambda)|| <= D ||y0|| / sqrt(Re lambda + beta)`.
    pub d_beta: f64,
    /// Sample points where the resolvent was cross-checked against Laplace
    /// quadrature of the closed-loop trajectory.
    pub quad_samples: Vec<C64>,
    /// Worst relative deviation at those samples.
    pub quad_max_rel: f64,
}

/// Default witness grid: `Re + beta` log-spaced in `[0.01, 10 + beta]`,
/// `Im` linear in `[-20, 20]`, 15 x 15.
pub fn default_lambda_grid(beta: f64) -> Vec<C64> {
    let mut grid = Vec::with_capacity(225);
    let lo = 0.01f64.ln();
    let hi = (10.0 + beta).ln();
    for i in 0..15 {
        let re = -beta + (lo + (hi - lo) * i as f64 / 14.0).exp();
        for j in 0..15 {
            let im = -20.0 + 40.0 * j as f64 / 14.0;
            grid.push(C64::new(re, im));
        }
    }
    grid
}

const GAUSS10_NODES: [f64; 10] = [
    -0.9739065285171717,
    -0.8650633666889845,
    -0.6794095682990244,
    -0.4333953941292472,
    -0.14887433898163122,
    0.14887433898163122,
    0.4333953941292472,
    0.6794095682990244,
    0.8650633666889845,
    0.9739065285171717,
];
const GAUSS10_WEIGHTS: [f64; 10] = [
    0.06667134430868814,
    0.14945134915058059,
    0.21908636251598204,
    0.26926671930999635,
    0.29552422471475287,
    0.29552422471475287,
    0.26926671930999635,
    0.21908636251598204,
    0.14945134915058059,
    0.06667134430868814,
];

/// `int_0^T e^{-lambda t} e^{A_cl t} y0 dt` by composite Gauss quadrature,
/// horizon chosen so the dropped tail is below 1e-10 relative.
fn laplace_quadrature(a_cl: &CMat, y0: &CVec, lambda: C64, alpha: f64, c1: f64) -> Result<CVec> {
    let rate = alpha + lambda.re;
    if !(rate > 0.0) {
        return Err(Error::InvalidParameter(
            "laplace quadrature needs Re lambda above the decay rate".into(),
        ));
    }
    let horizon = (23.0 + c1.max(1.0).ln()) / rate;
    let panels = 256usize;
    let h = horizon / panels as f64;
    let mut acc = CVec::zeros(y0.len());
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (node, weight) in GAUSS10_NODES.iter().zip(GAUSS10_WEIGHTS.iter()) {
            let t = mid + 0.5 * h * node;
            let traj = linalg::expm_apply(a_cl, t, y0, tol::EXP_NORM_CAP)?;
            let phase = (-lambda * C64::new(t, 0.0)).exp();
            acc += traj * (phase * C64::new(0.5 * h * weight, 0.0));
        }
    }
    Ok(acc)
}

/// Check the resolvent identity over the grid and fit the half-plane
/// constants for the witness pair.
pub fn laplace_identity_check(
    sys: &ControlSystem,
    report: &FeedbackReport,
    y0: &CVec,
    lambda_grid: &[C64],
    beta: f64,
) -> Result<LaplaceCheck> {
    if !(beta > 0.0) || beta >= report.alpha {
        return Err(Error::InvalidParameter(format!(
            "witness level beta={beta} must sit inside the achieved decay rate {}",
            report.alpha
        )));
    }
    if y0.len() != sys.n() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has length {}, system dimension is {}",
            y0.len(),
            sys.n()
        )));
    }
    let y_norm = y0.norm();
    let a_cl = sys.a() + sys.b() * &report.k;
    let witnesses: Vec<Result<LaplaceWitness>> = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let mut m = -a_cl.clone();
            for i in 0..sys.n() {
                m[(i, i)] += lambda;
            }
            let xi = linalg::solve(&m, y0, "closed-loop resolvent")?;
            let eta = -(&report.k * &xi);
            let mut res_vec = -sys.a() * &xi + sys.b() * &eta - y0;
            for i in 0..sys.n() {
                res_vec[i] += lambda * xi[i];
            }
            let residual = res_vec.norm();
            if residual > 1e-9 * y_norm.max(1e-300) {
                return Err(Error::SingularSolve("witness identity residual above tolerance"));
            }
            Ok(LaplaceWitness {
                lambda,
                xi,
                eta,
                residual,
            })
        })
        .collect();
    let witnesses: Result<Vec<LaplaceWitness>> = witnesses.into_iter().collect();
    let witnesses = witnesses?;

    let (mut c_beta, mut d_beta) = (0.0f64, 0.0f64);
    if y_norm > 0.0 {
        for w in &witnesses {
            let re_b = w.lambda.re + beta;
            c_beta = c_beta.max(w.xi.norm() * re_b / y_norm);
            d_beta = d_beta.max(w.eta.norm() * re_b.sqrt() / y_norm);
        }
    }

    // quadrature cross-check at three comfortably convergent sample points
    let mut samples: Vec<&LaplaceWitness> = witnesses.iter().filter(|w| w.lambda.re >= 0.0).collect();
    if samples.is_empty() {
        samples = witnesses.iter().collect();
    }
    let picks = [0, samples.len() / 2, samples.len() - 1];
    let mut quad_samples = Vec::new();
    let mut quad_max_rel = 0.0f64;
    if y_norm > 0.0 {
        for &i in picks.iter() {
            let w = samples[i];
            if quad_samples.contains(&w.lambda) {
                continue;
            }
            let quad = laplace_quadrature(&a_cl, y0, w.lambda, report.alpha, report.c1)?;
            let rel = (&quad - &w.xi).norm() / w.xi.norm().max(1e-300);
            quad_samples.push(w.lambda);
            quad_max_rel = quad_max_rel.max(rel);
        }
    }
    Ok(LaplaceCheck {
        witnesses,
        c_beta,
        d_beta,
        quad_samples,
        quad_max_rel,
    })
}

/// Closed-loop LQ cost `int_0^inf (||y||^2 + ||u||^2) dt` along the
/// trajectory from `x0`, by quadrature; the Riccati form `x0^H P x0` is the
/// algebraic value it must match.
pub fn lq_cost_quadrature(sys: &ControlSystem, k: &CMat, x0: &CVec) -> Result<f64> {
    let a_cl = sys.a() + sys.b() * k;
    let alpha = -linalg::spectral_abscissa(&a_cl)?;
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(
            "cost quadrature needs a stable closed loop".into(),
        ));
    }
    let k_sq = linalg::spectral_norm(k).powi(2);
    let horizon = (30.0 + (1.0 + k_sq).ln()) / (2.0 * alpha);
    let panels = 256usize;
    let h = horizon / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        for (node, weight) in GAUSS10_NODES.iter().zip(GAUSS10_WEIGHTS.iter()) {
            let t = mid + 0.5 * h * node;
            let y = linalg::expm_apply(&a_cl, t, x0, tol::EXP_NORM_CAP)?;
            let u = k * &y;
            total += 0.5 * h * weight * (y.norm_squared() + u.norm_squared());
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64) -> ControlSystem {
        ControlSystem::new(
            CMat::from_element(1, 1, C64::new(a, 0.0)),
            CMat::from_element(1, 1, C64::new(b, 0.0)),
            "scalar",
        )
        .unwrap()
    }

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn riccati_scalar_integrator() {
        let sol = solve_lq_riccati(&scalar(0.0, 1.0)).unwrap();
        assert!((sol.p[(0, 0)].re - 1.0).abs() <= 1e-12);
        assert!(sol.residual <= 1e-12);
    }

    #[test]
    fn riccati_scalar_unstable() {
        let sol = solve_lq_riccati(&scalar(1.0, 1.0)).unwrap();
        assert!((sol.p[(0, 0)].re - (1.0 + SQRT2)).abs() <= 1e-12);
        let a_cl = 1.0 - sol.p[(0, 0)].re;
        assert!((a_cl + SQRT2).abs() <= 1e-12);
    }

    #[test]
    fn riccati_lyapunov_case_without_control() {
        let sys = ControlSystem::new(
            CMat::from_element(1, 1, C64::new(-1.0, 0.0)),
            CMat::zeros(1, 0),
            "lyapunov",
        )
        .unwrap();
        let sol = solve_lq_riccati(&sys).unwrap();
        assert!((sol.p[(0, 0)].re - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn riccati_rejects_unstabilizable_pair() {
        let sys = ControlSystem::new(
            CMat::from_diagonal(&CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)])),
            CMat::from_column_slice(2, 1, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
            "bad",
        )
        .unwrap();
        match solve_lq_riccati(&sys) {
            Err(Error::NotStabilizable(msg)) => assert!(msg.contains("1.0")),
            other => panic!("expected NotStabilizable, got {other:?}"),
        }
    }

    #[test]
    fn riccati_flags_marginal_axis_spectrum() {
        // eigenvalue just outside the spectral-kernel band but within the
        // Hamiltonian axis tolerance
        let sys = ControlSystem::new(
            CMat::from_element(1, 1, C64::new(-1.5e-10, 0.0)),
            CMat::zeros(1, 0),
            "marginal",
        )
        .unwrap();
        match solve_lq_riccati(&sys) {
            Err(Error::MarginalRiccati { .. }) => {}
            other => panic!("expected MarginalRiccati, got {other:?}"),
        }
    }

    #[test]
    fn feedback_constants_on_scalar_unstable() {
        let rep = stabilizing_feedback(&scalar(1.0, 1.0)).unwrap();
        assert!(rep.certified);
        assert!((rep.alpha - SQRT2).abs() <= 1e-10);
        assert!((rep.c1 - 1.0).abs() <= 1e-10);
        let expected_c2_sq = (1.0 + SQRT2).powi(2) / (2.0 * SQRT2);
        assert!((rep.c2 * rep.c2 - expected_c2_sq).abs() <= 1e-9);
    }

    #[test]
    fn feedback_without_control_on_stable_system() {
        let sys = ControlSystem::new(
            CMat::from_diagonal(&CVec::from_vec(vec![C64::new(-2.0, 1.0), C64::new(-3.0, 0.0)])),
            CMat::zeros(2, 0),
            "stable",
        )
        .unwrap();
        let rep = stabilizing_feedback(&sys).unwrap();
        assert_eq!(rep.k.nrows(), 0);
        assert!((rep.alpha - 2.0).abs() <= 1e-10);
        assert!(rep.c2 == 0.0);
        assert!(rep.certified);
    }

    #[test]
    fn rapid_feedback_reaches_target() {
        let rep = rapid_feedback(&scalar(0.0, 1.0), 5.0).unwrap();
        assert!(rep.certified);
        assert!(rep.alpha >= 5.0 - 1e-8);
    }

    #[test]
    fn rapid_feedback_blocked_by_uncontrollable_mode() {
        let sys = ControlSystem::new(
            CMat::from_element(1, 1, C64::new(-2.0, 0.0)),
            CMat::from_element(1, 1, C64::new(0.0, 0.0)),
            "fixed-mode",
        )
        .unwrap();
        let ok = rapid_feedback(&sys, 1.9).unwrap();
        assert!(ok.certified);
        match rapid_feedback(&sys, 2.1) {
            Err(Error::NotStabilizable(msg)) => assert!(msg.contains("2.1")),
            other => panic!("expected NotStabilizable, got {other:?}"),
        }
    }

    #[test]
    fn rapid_feedback_trivial_without_control() {
        let sys = ControlSystem::new(
            CMat::from_element(1, 1, C64::new(-3.0, 0.0)),
            CMat::zeros(1, 0),
            "uncontrolled",
        )
        .unwrap();
        let rep = rapid_feedback(&sys, 1.0).unwrap();
        assert!(rep.certified);
        assert!((rep.alpha - 3.0).abs() <= 1e-10);
    }

    #[test]
    fn decay_rate_of_partially_controllable_pair() {
        let sys = ControlSystem::new(
            CMat::from_diagonal(&CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(-2.0, 0.0)])),
            CMat::from_column_slice(2, 1, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]),
            "split",
        )
        .unwrap();
        let (sigma, reachable) = optimal_decay_rate(&sys).unwrap();
        assert!((sigma - 2.0).abs() <= 1e-9);
        assert!(reachable);
    }

    #[test]
    fn decay_rate_infinite_for_controllable_pair() {
        let sys = ControlSystem::new(
            CMat::from_row_slice(
                2,
                2,
                &[
                    C64::new(0.0, 0.0),
                    C64::new(1.0, 0.0),
                    C64::new(0.0, 0.0),
                    C64::new(0.0, 0.0),
                ],
            ),
            CMat::from_column_slice(2, 1, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)]),
            "chain",
        )
        .unwrap();
        let (sigma, reachable) = optimal_decay_rate(&sys).unwrap();
        assert!(sigma.is_infinite() && reachable);
    }

    #[test]
    fn decay_rate_defective_block_not_reachable() {
        // uncontrollable part is a Jordan block at -2
        let a = CMat::from_row_slice(
            3,
            3,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(-2.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(-2.0, 0.0),
            ],
        );
        let b = CMat::from_column_slice(
            3,
            1,
            &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
        );
        let sys = ControlSystem::new(a, b, "jordan-tail").unwrap();
        let (sigma, reachable) = optimal_decay_rate(&sys).unwrap();
        assert!((sigma - 2.0).abs() <= 1e-6);
        assert!(!reachable);
    }

    #[test]
    fn laplace_witness_scalar_closed_loop() {
        let sys = scalar(1.0, 1.0);
        let rep = stabilizing_feedback(&sys).unwrap();
        let y0 = CVec::from_element(1, C64::new(1.0, 0.0));
        let grid = [C64::new(0.0, 0.0)];
        let check = laplace_identity_check(&sys, &rep, &y0, &grid, 1.0).unwrap();
        let xi = &check.witnesses[0].xi;
        assert!((xi[0].re - 1.0 / SQRT2).abs() <= 1e-12);
        assert!(check.witnesses[0].residual <= 1e-12);
    }

    #[test]
    fn laplace_zero_state_gives_zero_witness() {
        let sys = scalar(1.0, 1.0);
        let rep = stabilizing_feedback(&sys).unwrap();
        let y0 = CVec::zeros(1);
        let grid = default_lambda_grid(1.0);
        let check = laplace_identity_check(&sys, &rep, &y0, &grid, 1.0).unwrap();
        assert!(check.c_beta == 0.0 && check.d_beta == 0.0);
    }

    #[test]
    fn laplace_grid_and_quadrature_on_dense_system() {
        let a = CMat::from_row_slice(
            4,
            4,
            &[
                C64::new(0.4, 0.3),
                C64::new(0.7, 0.0),
                C64::new(0.0, -0.2),
                C64::new(0.1, 0.0),
                C64::new(0.0, 0.0),
                C64::new(-0.8, 0.5),
                C64::new(0.3, 0.0),
                C64::new(0.0, 0.1),
                C64::new(0.2, 0.0),
                C64::new(0.0, 0.0),
                C64::new(-1.2, -0.4),
                C64::new(0.5, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.1, 0.2),
                C64::new(0.0, 0.0),
                C64::new(-0.9, 0.0),
            ],
        );
        let b = CMat::from_column_slice(
            4,
            2,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.3),
                C64::new(0.4, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.6, 0.0),
                C64::new(0.0, -0.2),
                C64::new(1.0, 0.0),
            ],
        );
        let sys = ControlSystem::new(a, b, "dense4").unwrap();
        let rep = stabilizing_feedback(&sys).unwrap();
        assert!(rep.certified);
        let beta = (0.5 * rep.alpha).min(0.5);
        let y0 = CVec::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, -0.5),
            C64::new(0.3, 0.2),
            C64::new(-0.7, 0.0),
        ]);
        let grid = default_lambda_grid(beta);
        let check = laplace_identity_check(&sys, &rep, &y0, &grid, beta).unwrap();
        assert!(check.c_beta.is_finite() && check.c_beta > 0.0);
        assert!(check.d_beta.is_finite() && check.d_beta > 0.0);
        assert!(check.witnesses.iter().all(|w| w.residual <= 1e-9 * y0.norm()));
        assert!(
            check.quad_max_rel <= 1e-6,
            "quadrature deviation {}",
            check.quad_max_rel
        );
    }

    #[test]
    fn closed_loop_cost_matches_riccati_form() {
        let sys = scalar(1.0, 1.0);
        let sol = solve_lq_riccati(&sys).unwrap();
        let rep = stabilizing_feedback(&sys).unwrap();
        let x0 = CVec::from_element(1, C64::new(1.0, 0.0));
        let quad = lq_cost_quadrature(&sys, &rep.k, &x0).unwrap();
        let form = (x0.adjoint() * &sol.p * &x0)[(0, 0)].re;
        assert!((quad - form).abs() <= 1e-6 * form, "quad {quad} vs form {form}");
    }
}
