//! Matrix exponential by scaling and squaring with Padé approximants.
//!
//! Follows Higham, "The scaling and squaring method for the matrix
//! exponential revisited" (SIAM J. Matrix Anal. Appl. 26, 2005): pick the
//! smallest Padé order in {3, 5, 7, 9, 13} whose backward-error bound
//! theta_m covers ||A||_1, falling back to order 13 with 2^s scaling.
//! The coefficients are identical for complex matrices.

use super::{solve_mat, CMat, CVec, C64};
use crate::error::{Error, Result};

const THETA_3: f64 = 1.495585217958292e-2;
const THETA_5: f64 = 2.539398330063230e-1;
const THETA_7: f64 = 9.504178996162932e-1;
const THETA_9: f64 = 2.097847961257068e0;
const THETA_13: f64 = 5.371920351148152e0;

const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

fn pade_coeffs(m: usize) -> Vec<f64> {
    // b_j = (2m - j)! m! / ((2m)! (m - j)! j!)
    let mut b = vec![0.0; m + 1];
    b[m] = 1.0;
    for j in (0..m).rev() {
        // ratio b_j / b_{j+1} = (j+1)(2m - j) / (m - j)
        b[j] = b[j + 1] * ((j + 1) as f64) * ((2 * m - j) as f64) / ((m - j) as f64);
    }
    b
}

/// Evaluate the order-m (m in {3,5,7,9}) Padé approximant r_m(A).
fn pade_low(a: &CMat, m: usize) -> Result<CMat> {
    let n = a.nrows();
    let id = CMat::identity(n, n);
    let b = pade_coeffs(m);
    let a2 = a * a;
    // U = A * sum b_{2k+1} A^{2k},  V = sum b_{2k} A^{2k}
    let mut even = id.clone() * C64::new(b[0], 0.0);
    let mut odd = id.clone() * C64::new(b[1], 0.0);
    let mut pow = id.clone();
    for k in 1..=(m / 2) {
        pow = &pow * &a2;
        even += &pow * C64::new(b[2 * k], 0.0);
        if 2 * k + 1 <= m {
            odd += &pow * C64::new(b[2 * k + 1], 0.0);
        }
    }
    let u = a * odd;
    let v = even;
    solve_mat(&(&v - &u), &(&v + &u), "pade denominator")
}

/// Evaluate the order-13 Padé approximant r_13(A).
fn pade_13(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    let id = CMat::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let c = |i: usize| C64::new(B13[i], 0.0);
    let u_inner = &a6 * (&a6 * c(13) + &a4 * c(11) + &a2 * c(9))
        + &a6 * c(7)
        + &a4 * c(5)
        + &a2 * c(3)
        + &id * c(1);
    let u = a * u_inner;
    let v = &a6 * (&a6 * c(12) + &a4 * c(10) + &a2 * c(8))
        + &a6 * c(6)
        + &a4 * c(4)
        + &a2 * c(2)
        + &id * c(0);
    solve_mat(&(&v - &u), &(&v + &u), "pade denominator")
}

/// Matrix exponential `e^A` of a complex square matrix.
pub fn expm(a: &CMat) -> Result<CMat> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "expm needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok(CMat::zeros(0, 0));
    }
    let norm = one_norm(a);
    if !norm.is_finite() {
        return Err(Error::NonFinite("expm input"));
    }
    if norm <= THETA_3 {
        return pade_low(a, 3);
    }
    if norm <= THETA_5 {
        return pade_low(a, 5);
    }
    if norm <= THETA_7 {
        return pade_low(a, 7);
    }
    if norm <= THETA_9 {
        return pade_low(a, 9);
    }
    let s = if norm <= THETA_13 {
        0
    } else {
        (norm / THETA_13).log2().ceil() as u32
    };
    let scaled = a * C64::new((0.5f64).powi(s as i32), 0.0);
    let mut r = pade_13(&scaled)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// Apply `e^{A t}` to a vector, with a diagonal fast path and an overflow cap.
///
/// The cap guards `||A||_1 * |t|`; beyond it the squaring chain loses all
/// relative accuracy, so the call refuses instead of returning noise.
pub fn expm_apply(a: &CMat, t: f64, v: &CVec, cap: f64) -> Result<CVec> {
    let n = a.nrows();
    if v.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "expm_apply: vector length {} vs matrix dimension {}",
            v.len(),
            n
        )));
    }
    if is_diagonal(a) {
        let mut out = v.clone();
        for i in 0..n {
            let z = a[(i, i)] * C64::new(t, 0.0);
            if z.re > cap {
                return Err(Error::ExpOverflow { norm: z.re, cap });
            }
            out[i] *= z.exp();
        }
        return Ok(out);
    }
    let scaled_norm = one_norm(a) * t.abs();
    if scaled_norm > cap {
        return Err(Error::ExpOverflow {
            norm: scaled_norm,
            cap,
        });
    }
    let e = expm(&(a * C64::new(t, 0.0)))?;
    Ok(&e * v)
}

/// Exact structural diagonality (models build exactly diagonal generators).
pub fn is_diagonal(a: &CMat) -> bool {
    let n = a.nrows();
    if n != a.ncols() {
        return false;
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && a[(i, j)] != C64::new(0.0, 0.0) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_of_diagonal_matches_scalar_exp() {
        let d = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::new(-1.0, 0.0),
            C64::new(0.5, 2.0),
            C64::new(0.0, -3.0),
        ]));
        let e = expm(&d).unwrap();
        for i in 0..3 {
            let expected = d[(i, i)].exp();
            assert!((e[(i, i)] - expected).norm() <= 1e-14 * expected.norm());
        }
    }

    #[test]
    fn exponential_of_nilpotent_is_polynomial() {
        let a = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        let e = expm(&a).unwrap();
        let expected = CMat::identity(2, 2) + &a;
        assert!((e - expected).norm() <= 1e-15);
    }

    #[test]
    fn rotation_generator_gives_cos_sin() {
        let th = 1.3f64;
        let a = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(-th, 0.0),
                C64::new(th, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)].re - th.cos()).abs() <= 1e-14);
        assert!((e[(1, 0)].re - th.sin()).abs() <= 1e-14);
        assert!((e[(0, 1)].re + th.sin()).abs() <= 1e-14);
    }

    #[test]
    fn inverse_property_under_scaling_branch() {
        // norm > theta_13 forces the squaring chain
        let mut seed = 11u64;
        let mut next = move || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((seed >> 11) as f64) / (1u64 << 53) as f64 - 0.5
        };
        let a = CMat::from_fn(6, 6, |_, _| C64::new(next() * 4.0, next() * 4.0));
        let e1 = expm(&a).unwrap();
        let e2 = expm(&(-&a)).unwrap();
        let prod = &e1 * &e2;
        assert!((prod - CMat::identity(6, 6)).norm() <= 1e-10);
    }

    #[test]
    fn similarity_reduces_to_scalar_case() {
        let p = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(1.0, 0.0),
                C64::new(2.0, 1.0),
                C64::new(0.0, 0.0),
                C64::new(1.0, -1.0),
            ],
        );
        let d = CMat::from_diagonal(&CVec::from_vec(vec![
            C64::new(-2.0, 1.0),
            C64::new(0.3, -0.4),
        ]));
        let pinv = p.clone().lu().try_inverse().unwrap();
        let a = &p * &d * &pinv;
        let e = expm(&a).unwrap();
        let ed = expm(&d).unwrap();
        let expected = &p * ed * &pinv;
        assert!((e - expected).norm() <= 1e-12);
    }

    #[test]
    fn apply_respects_overflow_cap() {
        let a = CMat::from_row_slice(1, 1, &[C64::new(10.0, 0.0)]);
        let v = CVec::from_vec(vec![C64::new(1.0, 0.0)]);
        let err = expm_apply(&a, 100.0, &v, 200.0);
        assert!(matches!(err, Err(Error::ExpOverflow { .. })));
        let ok = expm_apply(&a, 1.0, &v, 200.0).unwrap();
        assert!((ok[0].re - 10f64.exp()).abs() <= 1e-10 * 10f64.exp());
    }
}
