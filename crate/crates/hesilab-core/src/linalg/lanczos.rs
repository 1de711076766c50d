//! Shift-invert Lanczos estimate of the smallest eigenvalue of a Hermitian
//! positive semidefinite operator.
//!
//! The caller supplies the action of `(H - sigma I)^{-1}` with `sigma`
//! strictly below the spectrum (for PSD operators `sigma < 0` always
//! works). Lanczos with full reorthogonalization runs on the inverse, whose
//! LARGEST Ritz value `theta` converges fast and monotonically; the
//! estimate is `lambda_min = sigma + 1/theta`. Convergence is declared when
//! either the Ritz residual or the per-step change drops below `rel_tol`
//! relative to `theta`. The start vector is a fixed deterministic sequence
//! so repeated runs are bit-identical.

use super::{CVec, C64};

#[derive(Debug, Clone, Copy)]
pub struct ShiftInvertOutcome {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest or smallest eigenvalue of a real symmetric tridiagonal matrix by
/// Sturm-count bisection. `alpha` holds the diagonal, `beta` the
/// off-diagonal (one shorter).
fn tridiag_extreme(alpha: &[f64], beta: &[f64], largest: bool) -> f64 {
    let k = alpha.len();
    debug_assert!(k >= 1 && beta.len() + 1 == k);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        let r = (if i > 0 { beta[i - 1].abs() } else { 0.0 })
            + (if i < k - 1 { beta[i].abs() } else { 0.0 });
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    if lo == hi {
        return lo;
    }
    // count of eigenvalues strictly below x
    let count_below = |x: f64| -> usize {
        let mut cnt = 0usize;
        let mut d = alpha[0] - x;
        if d < 0.0 {
            cnt += 1;
        }
        for i in 1..k {
            let denom = if d == 0.0 { 1e-300 } else { d };
            d = alpha[i] - x - beta[i - 1] * beta[i - 1] / denom;
            if d < 0.0 {
                cnt += 1;
            }
        }
        cnt
    };
    let target = if largest { k - 1 } else { 0 };
    let mut a = lo;
    let mut b = hi;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if count_below(mid) > target {
            b = mid;
        } else {
            a = mid;
        }
        if (b - a) <= 1e-15 * b.abs().max(a.abs()).max(1.0) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Magnitude of the last component of the unit eigenvector of the symmetric
/// tridiagonal `(alpha, beta)` belonging to the eigenvalue `theta`, by two
/// rounds of inverse iteration with partial pivoting. Feeds the classical
/// Ritz residual estimate `beta_next * |y_last|`.
fn tridiag_last_component(alpha: &[f64], beta: &[f64], theta: f64) -> f64 {
    let k = alpha.len();
    if k == 1 {
        return 1.0;
    }
    let guard = 1e-300 + 1e-15 * theta.abs().max(1.0);
    let pivot_of = |v: f64| if v.abs() < guard { guard.copysign(v) } else { v };

    // band LU of (T - theta I) with partial pivoting and one fill-in diagonal
    let mut d: Vec<f64> = alpha.iter().map(|&a| a - theta).collect();
    let mut e: Vec<f64> = beta.to_vec();
    let mut f = vec![0.0f64; k];
    let mut lower = vec![0.0f64; k - 1];
    let mut swapped = vec![false; k - 1];
    for i in 0..k - 1 {
        let mut sub = beta[i];
        if sub.abs() > d[i].abs() {
            swapped[i] = true;
            std::mem::swap(&mut d[i], &mut sub);
            std::mem::swap(&mut e[i], &mut d[i + 1]);
            if i + 1 < k - 1 {
                f[i] = e[i + 1];
                e[i + 1] = 0.0;
            }
        }
        let m = sub / pivot_of(d[i]);
        lower[i] = m;
        d[i + 1] -= m * e[i];
        if i + 1 < k - 1 {
            e[i + 1] -= m * f[i];
        }
    }

    let mut y = vec![1.0f64; k];
    for _ in 0..2 {
        for i in 0..k - 1 {
            if swapped[i] {
                y.swap(i, i + 1);
            }
            y[i + 1] -= lower[i] * y[i];
        }
        for i in (0..k).rev() {
            let mut s = y[i];
            if i + 1 < k {
                s -= e[i] * y[i + 1];
            }
            if i + 2 < k {
                s -= f[i] * y[i + 2];
            }
            y[i] = s / pivot_of(d[i]);
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return 1.0;
        }
        for v in &mut y {
            *v /= norm;
        }
    }
    y[k - 1].abs()
}

fn deterministic_start(n: usize) -> CVec {
    let mut state = 0x9E37_79B9_7F4A_7C15u64 ^ (n as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    let mut next = move || {
        state ^= state >> 30;
        state = state.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        state ^= state >> 27;
        state = state.wrapping_mul(0x94D0_49BB_1331_11EB);
        state ^= state >> 31;
        ((state >> 11) as f64) / (1u64 << 53) as f64 - 0.5
    };
    let mut v = CVec::from_fn(n, |_, _| C64::new(next(), next()));
    let norm = v.norm();
    v /= C64::new(norm, 0.0);
    v
}

/// Smallest eigenvalue of the Hermitian operator behind `apply_inv`.
pub fn smallest_eig_shift_invert(
    n: usize,
    sigma: f64,
    max_iter: usize,
    rel_tol: f64,
    mut apply_inv: impl FnMut(&CVec) -> CVec,
) -> ShiftInvertOutcome {
    assert!(n >= 1);
    let max_iter = max_iter.min(n).max(1);
    let mut basis: Vec<CVec> = Vec::with_capacity(max_iter);
    let mut alphas: Vec<f64> = Vec::with_capacity(max_iter);
    let mut betas: Vec<f64> = Vec::with_capacity(max_iter);

    let mut v = deterministic_start(n);
    basis.push(v.clone());
    let mut theta_prev = f64::NAN;
    let mut theta = f64::NAN;
    let mut converged = false;
    let mut iters = 0usize;

    for k in 0..max_iter {
        iters = k + 1;
        let mut w = apply_inv(&v);
        let alpha = v.dotc(&w).re;
        alphas.push(alpha);
        // full reorthogonalization, two classical Gram-Schmidt passes
        for _ in 0..2 {
            for q in &basis {
                let c = q.dotc(&w);
                w.axpy(-c, q, C64::new(1.0, 0.0));
            }
        }
        let beta = w.norm();
        theta = tridiag_extreme(&alphas, &betas, true);
        let theta_floor = theta.abs().max(f64::MIN_POSITIVE);
        // Ritz residual ||A^{-1} z - theta z|| = beta * |y_k|; it certifies an
        // eigenvalue within that distance of theta, so clustered spectra stop
        // as soon as the cluster is resolved instead of creeping to the cap.
        if k >= 2 && beta * tridiag_last_component(&alphas, &betas, theta) <= rel_tol * theta_floor
        {
            converged = true;
            break;
        }
        let exhausted_space = beta <= 1e-14 * alpha.abs().max(1.0) || k + 1 == max_iter;
        if k >= 4 && (theta - theta_prev).abs() <= rel_tol * theta_floor {
            converged = true;
            break;
        }
        if exhausted_space {
            // invariant subspace found: the tridiagonal spectrum is exact
            converged = beta <= 1e-14 * alpha.abs().max(1.0);
            break;
        }
        theta_prev = theta;
        betas.push(beta);
        v = w / C64::new(beta, 0.0);
        basis.push(v.clone());
    }

    if !(theta > 0.0) {
        // the operator behind apply_inv was not positive definite
        return ShiftInvertOutcome {
            value: f64::NAN,
            iterations: iters,
            converged: false,
        };
    }
    ShiftInvertOutcome {
        value: sigma + 1.0 / theta,
        iterations: iters,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{hermitian_eigen, hermitian_part, CMat};
    use super::*;

    fn randish(n: usize, m: usize, seed: &mut u64) -> CMat {
        CMat::from_fn(n, m, |_, _| {
            let mut next = || {
                *seed = seed
                    .wrapping_mul(6364136223846793005)
                    .wrapping_add(1442695040888963407);
                ((*seed >> 11) as f64) / (1u64 << 53) as f64 - 0.5
            };
            C64::new(next(), next())
        })
    }

    fn check_against_dense(h: &CMat, tol: f64) {
        let n = h.nrows();
        let (vals, _) = hermitian_eigen(h);
        let lam_min = vals[0];
        let chol = h.clone().cholesky().expect("test matrix must be PD");
        let out = smallest_eig_shift_invert(n, 0.0, 200, 1e-12, |x| chol.solve(x));
        assert!(out.converged, "lanczos did not converge");
        assert!(
            (out.value - lam_min).abs() <= tol * lam_min.abs().max(1.0),
            "lanczos {} vs dense {}",
            out.value,
            lam_min
        );
    }

    #[test]
    fn matches_dense_eigensolver_on_random_pd() {
        let mut s = 17u64;
        for n in [3usize, 10, 40] {
            let r = randish(n, n, &mut s);
            let h = hermitian_part(&(&r * r.adjoint())) + CMat::identity(n, n) * C64::new(0.1, 0.0);
            check_against_dense(&h, 1e-9);
        }
    }

    #[test]
    fn handles_tightly_clustered_bottom() {
        let n = 30;
        let mut s = 5u64;
        let r = randish(n, n, &mut s);
        // unitary-ish frame from QR of a random matrix
        let qr = r.qr();
        let q = qr.q();
        let mut d = CVec::zeros(n);
        for i in 0..n {
            d[i] = C64::new(1.0 + 1e-11 * (i as f64 % 3.0) + if i > 2 { i as f64 } else { 0.0 }, 0.0);
        }
        let h = &q * CMat::from_diagonal(&d) * q.adjoint();
        let h = hermitian_part(&h);
        check_against_dense(&h, 1e-8);
    }

    #[test]
    fn deterministic_across_runs() {
        let mut s = 23u64;
        let r = randish(25, 25, &mut s);
        let h = hermitian_part(&(&r * r.adjoint())) + CMat::identity(25, 25) * C64::new(0.5, 0.0);
        let chol = h.clone().cholesky().unwrap();
        let a = smallest_eig_shift_invert(25, 0.0, 200, 1e-12, |x| chol.solve(x));
        let b = smallest_eig_shift_invert(25, 0.0, 200, 1e-12, |x| chol.solve(x));
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn exact_on_tiny_dimensions() {
        let h = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(2.0, 0.0),
                C64::new(0.0, 1.0),
                C64::new(0.0, -1.0),
                C64::new(3.0, 0.0),
            ],
        );
        // eigenvalues of [[2, i], [-i, 3]] are (5 +- sqrt(5))/2
        let expected = (5.0 - 5f64.sqrt()) / 2.0;
        let chol = h.clone().cholesky().unwrap();
        let out = smallest_eig_shift_invert(2, 0.0, 10, 1e-13, |x| chol.solve(x));
        assert!((out.value - expected).abs() <= 1e-12);
    }
}
