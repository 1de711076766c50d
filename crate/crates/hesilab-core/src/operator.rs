//! Control pairs `(A, B)` and the operator-level primitives the analysis
//! modules share: adjoints, semigroup action, normality, controllable/
//! uncontrollable splitting, and semigroup growth bounds.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64};
use crate::tol;

/// A finite-dimensional control pair: state equation `y' = A y + B u`
/// with `A` an `n x n` complex matrix and `B` an `n x m` complex matrix.
/// `m = 0` (no control) is allowed.
#[derive(Debug, Clone)]
pub struct ControlSystem {
    n: usize,
    m: usize,
    a: CMat,
    b: CMat,
    label: String,
}

impl ControlSystem {
    pub fn new(a: CMat, b: CMat, label: impl Into<String>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                n,
                a.ncols()
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("state dimension must be >= 1".into()));
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "B has {} rows but A is {}x{}",
                b.nrows(),
                n,
                n
            )));
        }
        if !linalg::all_finite(&a) {
            return Err(Error::NonFinite("A"));
        }
        if !linalg::all_finite(&b) {
            return Err(Error::NonFinite("B"));
        }
        let m = b.ncols();
        Ok(Self {
            n,
            m,
            a,
            b,
            label: label.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// The observation pair `(A*, B*)` used by every dual-side estimate.
    pub fn adjoint_pair(&self) -> AdjointPair {
        AdjointPair {
            a_star: self.a.adjoint(),
            b_star: self.b.adjoint(),
        }
    }

    /// Action of the semigroup: `e^{A t} v`, diagonal fast path included.
    pub fn semigroup_apply(&self, t: f64, v: &CVec) -> Result<CVec> {
        linalg::expm_apply(&self.a, t, v, tol::EXP_NORM_CAP)
    }
}

/// The conjugate-transposed pair `(A*, B*)`; `b_star` is `m x n`.
#[derive(Debug, Clone)]
pub struct AdjointPair {
    pub a_star: CMat,
    pub b_star: CMat,
}

impl AdjointPair {
    /// Undo the conjugation, recovering `(A, B)`.
    pub fn primal(&self) -> (CMat, CMat) {
        (self.a_star.adjoint(), self.b_star.adjoint())
    }

    /// Adjoint semigroup action `e^{A* t} phi`.
    pub fn semigroup_apply(&self, t: f64, phi: &CVec) -> Result<CVec> {
        linalg::expm_apply(&self.a_star, t, phi, tol::EXP_NORM_CAP)
    }
}

/// Normality check: `A` is normal when `A A* = A* A`. Returns the verdict at
/// the relative tolerance together with the raw defect `||AA* - A*A||_F`.
pub fn check_normality(a: &CMat, rel_tol: f64) -> (bool, f64) {
    let defect = (a * a.adjoint() - a.adjoint() * a).norm();
    let scale = a.norm();
    (defect <= rel_tol * scale * scale, defect)
}

/// Controllable/uncontrollable splitting along an orthonormal change of
/// basis: `P A P^H = [[A1, A2], [0, A3]]`, `P B = [[B1], [0]]` with the
/// leading `nc` rows spanning the controllable subspace
/// `range [B, AB, ..., A^{n-1} B]`.
#[derive(Debug, Clone)]
pub struct KalmanDecomposition {
    /// Unitary change of basis (rows are the new basis vectors).
    pub p: CMat,
    pub a1: CMat,
    pub a2: CMat,
    pub a3: CMat,
    pub b1: CMat,
    /// Dimension of the controllable subspace.
    pub nc: usize,
    /// Singular values bracketing the rank cut: (last kept, first dropped);
    /// zero entries when the cut sits at either end.
    pub rank_gap: (f64, f64),
}

/// Compute the Kalman controllability decomposition of `(A, B)`.
///
/// The Krylov blocks `A^k B` are renormalized per power so the rank
/// decision is immune to overflow from unstable spectra; scaling columns
/// does not change the column space.
pub fn kalman_decompose(sys: &ControlSystem) -> Result<KalmanDecomposition> {
    let n = sys.n();
    let m = sys.m();
    let a = sys.a();

    let mut krylov = CMat::zeros(n, n * m.max(1));
    if m > 0 {
        let mut block = sys.b().clone();
        for k in 0..n {
            let norm = block.norm();
            if norm > 0.0 {
                krylov
                    .view_mut((0, k * m), (n, m))
                    .copy_from(&(&block / C64::new(norm.max(1.0), 0.0)));
            }
            if k + 1 < n {
                block = a * block;
            }
        }
    }

    let (nc, kept, dropped) = linalg::rank_with_gap(&krylov, tol::RANK_REL_TOL);
    // full SVD provides an orthonormal basis of the controllable subspace
    // and, in its trailing columns, of the orthogonal complement
    let svd = krylov.clone().svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let mut p = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n.min(u.ncols()) {
            p[(j, i)] = u[(i, j)].conj();
        }
    }
    if u.ncols() < n {
        return Err(Error::DimensionMismatch(
            "controllability matrix SVD returned too few columns".into(),
        ));
    }

    let a_hat = &p * a * p.adjoint();
    let b_hat = &p * sys.b();
    let a1 = a_hat.view((0, 0), (nc, nc)).into_owned();
    let a2 = a_hat.view((0, nc), (nc, n - nc)).into_owned();
    let a3 = a_hat.view((nc, nc), (n - nc, n - nc)).into_owned();
    let b1 = b_hat.view((0, 0), (nc, m)).into_owned();

    Ok(KalmanDecomposition {
        p,
        a1,
        a2,
        a3,
        b1,
        nc,
        rank_gap: (kept, dropped),
    })
}

/// Exponential growth envelope of the adjoint semigroup:
/// `||e^{A* t}|| <= C(omega) e^{omega t}` on the sampled grid.
#[derive(Debug, Clone)]
pub struct SemigroupBounds {
    /// Spectral abscissa of `A*` (equal to that of `A`).
    pub omega: f64,
    /// Envelope constant fitted on the grid; always >= 1 since t = 0 is sampled.
    pub c_omega: f64,
    /// Uniform bound `sup_t ||e^{A* t}||` when the semigroup is bounded
    /// (omega <= 0); `None` for genuinely growing semigroups.
    pub c_uniform: Option<f64>,
}

/// Default sampling grid for growth-bound fits: dense early, sparse late.
pub fn default_time_grid() -> Vec<f64> {
    let mut g: Vec<f64> = (0..=40).map(|i| 0.05 * i as f64).collect();
    g.extend((1..=24).map(|i| 2.0 + 0.75 * i as f64));
    g
}

/// Fit `omega` and `C(omega)` for the adjoint semigroup on a time grid.
///
/// `omega` is the spectral abscissa (exact for the matrix case); `C` is the
/// grid maximum of `||e^{A* t}||_2 e^{-omega t}`, which certifies the bound
/// at the sampled times. Defective spectra make the true envelope
/// polynomially larger between late samples; the dense early grid is where
/// the transient actually peaks for the systems built here.
pub fn growth_bound_estimate(sys: &ControlSystem, t_grid: &[f64]) -> Result<SemigroupBounds> {
    let a_star = sys.a().adjoint();
    let omega = linalg::spectral_abscissa(&a_star)?;
    let mut c_omega: f64 = 1.0;
    let mut sup_norm: f64 = 1.0;
    for &t in t_grid {
        if t < 0.0 {
            return Err(Error::InvalidParameter("time grid must be nonnegative".into()));
        }
        let et = linalg::expm(&(&a_star * C64::new(t, 0.0)))?;
        let norm = linalg::spectral_norm(&et);
        sup_norm = sup_norm.max(norm);
        c_omega = c_omega.max(norm * (-omega * t).exp());
    }
    let c_uniform = if omega <= tol::EIG_CLASSIFY_RE {
        Some(sup_norm)
    } else {
        None
    };
    Ok(SemigroupBounds {
        omega,
        c_omega,
        c_uniform,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cs(a: CMat, b: CMat) -> ControlSystem {
        ControlSystem::new(a, b, "test").unwrap()
    }

    fn diag(entries: &[C64]) -> CMat {
        CMat::from_diagonal(&CVec::from_vec(entries.to_vec()))
    }

    #[test]
    fn adjoint_pair_conjugates_and_round_trips() {
        let a = CMat::from_row_slice(1, 1, &[C64::new(0.0, 1.0)]);
        let b = CMat::from_row_slice(1, 1, &[C64::new(1.0, 0.0)]);
        let sys = cs(a.clone(), b.clone());
        let adj = sys.adjoint_pair();
        assert_eq!(adj.a_star[(0, 0)], C64::new(0.0, -1.0));
        assert_eq!(adj.b_star[(0, 0)], C64::new(1.0, 0.0));
        let (a2, b2) = adj.primal();
        assert_eq!(a2, a);
        assert_eq!(b2, b);
    }

    #[test]
    fn semigroup_apply_diagonal_is_exact() {
        let sys = cs(
            diag(&[C64::new(-1.0, 2.0), C64::new(0.5, 0.0)]),
            CMat::zeros(2, 0),
        );
        let v = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(2.0, -1.0)]);
        let out = sys.semigroup_apply(0.7, &v).unwrap();
        let e0 = (C64::new(-1.0, 2.0) * 0.7).exp();
        let e1 = (C64::new(0.5, 0.0) * 0.7).exp();
        assert!((out[0] - e0 * v[0]).norm() <= 1e-15);
        assert!((out[1] - e1 * v[1]).norm() <= 1e-15);
    }

    #[test]
    fn semigroup_law_holds_for_dense_generator() {
        let a = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(-0.3, 0.2),
                C64::new(1.0, 0.0),
                C64::new(0.0, -0.5),
                C64::new(-0.1, 0.0),
            ],
        );
        let sys = cs(a, CMat::zeros(2, 0));
        let v = CVec::from_vec(vec![C64::new(0.3, 1.0), C64::new(-2.0, 0.1)]);
        let once = sys.semigroup_apply(1.1, &v).unwrap();
        let twice = sys
            .semigroup_apply(0.4, &sys.semigroup_apply(0.7, &v).unwrap())
            .unwrap();
        assert!((once - twice).norm() <= 1e-12);
    }

    #[test]
    fn normality_detects_jordan_block() {
        let jordan = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        let (is_normal, defect) = check_normality(&jordan, tol::NORMALITY_REL_TOL);
        assert!(!is_normal);
        assert!((defect - 2f64.sqrt()).abs() <= 1e-14);
        let (diag_normal, d0) = check_normality(&diag(&[C64::new(1.0, 3.0)]), 1e-12);
        assert!(diag_normal);
        assert_eq!(d0, 0.0);
    }

    #[test]
    fn kalman_splits_planted_uncontrollable_block() {
        // controllable 1d block at +1 driven by b; uncontrollable block at -2
        let a = diag(&[C64::new(1.0, 0.0), C64::new(-2.0, 0.0)]);
        let b = CMat::from_row_slice(2, 1, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let sys = cs(a, b);
        let k = kalman_decompose(&sys).unwrap();
        assert_eq!(k.nc, 1);
        assert!((k.a1[(0, 0)] - C64::new(1.0, 0.0)).norm() <= 1e-12);
        assert!((k.a3[(0, 0)] - C64::new(-2.0, 0.0)).norm() <= 1e-12);
        assert!(k.rank_gap.0 > 0.0);
        assert_eq!(k.rank_gap.1, 0.0);
    }

    #[test]
    fn kalman_block_structure_and_spectrum_split() {
        let mut seed = 42u64;
        let mut next = move || {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((seed >> 11) as f64) / (1u64 << 53) as f64 - 0.5
        };
        let n = 5;
        // planted block-triangular structure with 2 controllable dimensions
        let a_raw = CMat::from_fn(n, n, |i, j| {
            if i >= 2 && j < 2 {
                C64::new(0.0, 0.0)
            } else {
                C64::new(next(), next())
            }
        });
        let b_raw = CMat::from_fn(n, 1, |i, _| {
            if i < 2 {
                C64::new(next() + 1.0, next())
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let sys = cs(a_raw.clone(), b_raw);
        let k = kalman_decompose(&sys).unwrap();
        assert_eq!(k.nc, 2);
        // lower-left block of P A P^H vanishes
        let a_hat = &k.p * sys.a() * k.p.adjoint();
        let lower = a_hat.view((k.nc, 0), (n - k.nc, k.nc)).norm();
        assert!(lower <= 1e-10 * sys.a().norm());
        // spectrum splits as sigma(A1) union sigma(A3)
        let mut all = linalg::eigenvalues(sys.a()).unwrap();
        let mut split = linalg::eigenvalues(&k.a1).unwrap();
        split.extend(linalg::eigenvalues(&k.a3).unwrap());
        let sort_key = |z: &C64| (z.re, z.im);
        all.sort_by(|x, y| sort_key(x).partial_cmp(&sort_key(y)).unwrap());
        split.sort_by(|x, y| sort_key(x).partial_cmp(&sort_key(y)).unwrap());
        for (x, y) in all.iter().zip(split.iter()) {
            assert!((x - y).norm() <= 1e-8 * sys.a().norm().max(1.0));
        }
    }

    #[test]
    fn kalman_with_zero_control_is_fully_uncontrollable() {
        let a = diag(&[C64::new(-1.0, 0.0), C64::new(2.0, 1.0)]);
        let sys = cs(a.clone(), CMat::zeros(2, 0));
        let k = kalman_decompose(&sys).unwrap();
        assert_eq!(k.nc, 0);
        assert_eq!(k.a3.nrows(), 2);
        assert_eq!(k.a1.nrows(), 0);
    }

    #[test]
    fn growth_bound_on_normal_and_defective_cases() {
        let grid = default_time_grid();
        // normal, stable: envelope is exactly e^{-t}
        let sys = cs(diag(&[C64::new(-1.0, 0.0), C64::new(-3.0, 0.0)]), CMat::zeros(2, 0));
        let gb = growth_bound_estimate(&sys, &grid).unwrap();
        assert!((gb.omega + 1.0).abs() <= 1e-12);
        assert!((gb.c_omega - 1.0).abs() <= 1e-10);
        assert_eq!(gb.c_uniform.map(|c| (c - 1.0).abs() <= 1e-10), Some(true));

        // Jordan block at -1: same abscissa, transient pushes C above 1
        let j = CMat::from_row_slice(
            2,
            2,
            &[
                C64::new(-1.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.0),
                C64::new(-1.0, 0.0),
            ],
        );
        let sysj = cs(j, CMat::zeros(2, 0));
        let gbj = growth_bound_estimate(&sysj, &grid).unwrap();
        assert!((gbj.omega + 1.0).abs() <= 1e-12);
        assert!(gbj.c_omega > 1.05);

        // A = 0: bounded with C = 1, omega = 0
        let sys0 = cs(diag(&[C64::new(0.0, 0.0)]), CMat::zeros(1, 0));
        let gb0 = growth_bound_estimate(&sys0, &grid).unwrap();
        assert_eq!(gb0.omega, 0.0);
        assert!((gb0.c_omega - 1.0).abs() <= 1e-12);
        assert!(gb0.c_uniform.is_some());
    }

    #[test]
    fn rejects_bad_shapes_and_nonfinite() {
        assert!(ControlSystem::new(CMat::zeros(2, 3), CMat::zeros(2, 1), "x").is_err());
        assert!(ControlSystem::new(CMat::zeros(2, 2), CMat::zeros(3, 1), "x").is_err());
        let mut a = CMat::zeros(1, 1);
        a[(0, 0)] = C64::new(f64::NAN, 0.0);
        assert!(ControlSystem::new(a, CMat::zeros(1, 0), "x").is_err());
    }
}
