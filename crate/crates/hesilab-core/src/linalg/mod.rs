//! Dense complex linear algebra helpers on top of nalgebra.
//!
//! nalgebra supplies the factorizations (SVD, Hermitian eigen, complex
//! Schur, LU, Cholesky); this module adds what the analysis layers need on
//! top: Schur reordering, eigenvalue extraction, rank/nullspace cuts, and
//! the matrix exponential.

mod expm;
mod lanczos;

pub use expm::{expm, expm_apply, is_diagonal};
pub use lanczos::{smallest_eig_shift_invert, ShiftInvertOutcome};

use crate::error::{Error, Result};
use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Complex Schur decomposition `A = Q T Q^H` with `T` upper triangular.
pub fn schur(a: &CMat) -> Result<(CMat, CMat)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((CMat::zeros(0, 0), CMat::zeros(0, 0)));
    }
    // max_niter = 0 lets the iteration run to convergence; the eps below is
    // the deflation threshold relative to neighbouring diagonal entries.
    nalgebra::Schur::try_new(a.clone(), f64::EPSILON, 0)
        .map(|s| s.unpack())
        .ok_or(Error::EigConvergence)
}

/// Eigenvalues of a general complex matrix, via the Schur form.
pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    let (_, t) = schur(a)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(a: &CMat) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Swap the adjacent diagonal entries `t[k,k]` and `t[k+1,k+1]` of an upper
/// triangular `T` by a unitary similarity, accumulating the rotation into `Q`.
///
/// Uses the eigenvector `x = (t12, t22 - t11)` of the trailing eigenvalue of
/// the 2x2 block; the rotation with first column `x/||x||` moves `t22` to the
/// leading position.
fn swap_adjacent(q: &mut CMat, t: &mut CMat, k: usize) {
    let n = t.nrows();
    let t11 = t[(k, k)];
    let t12 = t[(k, k + 1)];
    let t22 = t[(k + 1, k + 1)];
    let x1 = t12;
    let x2 = t22 - t11;
    let r = (x1.norm_sqr() + x2.norm_sqr()).sqrt();
    if r == 0.0 {
        return; // identical eigenvalues, nothing to move
    }
    let u1 = x1 / r;
    let u2 = x2 / r;
    // g = [[u1, -conj(u2)], [u2, conj(u1)]] is unitary with g e1 = x/r.
    let g11 = u1;
    let g21 = u2;
    let g12 = -u2.conj();
    let g22 = u1.conj();
    // T <- G^H T (rows k, k+1)
    for j in 0..n {
        let a = t[(k, j)];
        let b = t[(k + 1, j)];
        t[(k, j)] = g11.conj() * a + g21.conj() * b;
        t[(k + 1, j)] = g12.conj() * a + g22.conj() * b;
    }
    // T <- T G (columns k, k+1)
    for i in 0..n {
        let a = t[(i, k)];
        let b = t[(i, k + 1)];
        t[(i, k)] = a * g11 + b * g21;
        t[(i, k + 1)] = a * g12 + b * g22;
    }
    // Q <- Q G
    for i in 0..n {
        let a = q[(i, k)];
        let b = q[(i, k + 1)];
        q[(i, k)] = a * g11 + b * g21;
        q[(i, k + 1)] = a * g12 + b * g22;
    }
    t[(k + 1, k)] = C64::new(0.0, 0.0);
}

/// Reorder a complex Schur pair so the selected eigenvalues occupy the
/// leading diagonal positions. Returns how many were selected.
///
/// The selection must be a function of the eigenvalue alone; equal
/// eigenvalues therefore never need to move past each other.
pub fn reorder_schur(q: &mut CMat, t: &mut CMat, select: &[bool]) -> usize {
    let n = t.nrows();
    assert_eq!(select.len(), n, "selection length must match dimension");
    let mut sel: Vec<bool> = select.to_vec();
    let mut target = 0usize;
    for j in 0..n {
        if sel[j] {
            let mut k = j;
            while k > target {
                swap_adjacent(q, t, k - 1);
                sel.swap(k - 1, k);
                k -= 1;
            }
            target += 1;
        }
    }
    target
}

/// Singular values of a rectangular complex matrix, descending.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let svd = m.clone().svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

/// Smallest singular value of a rectangular complex matrix.
pub fn min_singular_value(m: &CMat) -> f64 {
    let s = singular_values(m);
    s.last().copied().unwrap_or(0.0)
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(m: &CMat) -> f64 {
    let s = singular_values(m);
    s.first().copied().unwrap_or(0.0)
}

/// Numerical rank with the relative cut `sigma > rel_tol * sigma_max`,
/// together with the singular values bracketing the cut
/// `(last kept, first dropped)`; the bracket entries are 0 when the cut
/// sits at either end.
pub fn rank_with_gap(m: &CMat, rel_tol: f64) -> (usize, f64, f64) {
    let s = singular_values(m);
    if s.is_empty() {
        return (0, 0.0, 0.0);
    }
    let cut = rel_tol * s[0];
    let rank = s.iter().take_while(|&&x| x > cut).count();
    let kept = if rank > 0 { s[rank - 1] } else { 0.0 };
    let dropped = if rank < s.len() { s[rank] } else { 0.0 };
    (rank, kept, dropped)
}

/// Orthonormal basis of the numerical nullspace (right singular vectors
/// whose singular values fall at or below `rel_tol * sigma_max`).
pub fn nullspace(m: &CMat, rel_tol: f64) -> CMat {
    let ncols = m.ncols();
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut pairs: Vec<(f64, usize)> = svd
        .singular_values
        .iter()
        .copied()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let smax = pairs.first().map(|p| p.0).unwrap_or(0.0);
    let cut = rel_tol * smax;
    // v_t has min(nrows, ncols) rows; columns of V beyond that are an
    // orthonormal complement never touched by the SVD routine, so a wide
    // matrix needs them appended via completion. All callers here pass
    // tall-or-square matrices, which is asserted.
    assert!(
        m.nrows() >= ncols,
        "nullspace expects a tall or square matrix"
    );
    let null_idx: Vec<usize> = pairs
        .iter()
        .filter(|(s, _)| *s <= cut)
        .map(|&(_, i)| i)
        .collect();
    let mut basis = CMat::zeros(ncols, null_idx.len());
    for (col, &i) in null_idx.iter().enumerate() {
        for j in 0..ncols {
            basis[(j, col)] = v_t[(i, j)].conj();
        }
    }
    basis
}

/// Hermitian symmetrization `(M + M^H) / 2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigenvalues and eigenvectors of a Hermitian matrix, ascending.
pub fn hermitian_eigen(h: &CMat) -> (Vec<f64>, CMat) {
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let se = nalgebra::SymmetricEigen::new(h.clone());
    // SymmetricEigen can pair a reported eigenvalue with another value's
    // column when the spectrum spans many decades, so each value is taken
    // from its own column's Rayleigh quotient instead.
    let mut pairs: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let v = se.eigenvectors.column(i);
            ((v.adjoint() * h * v)[(0, 0)].re, i)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let vals = pairs.iter().map(|&(val, _)| val).collect();
    let mut vecs = CMat::zeros(n, n);
    for (col, &(_, i)) in pairs.iter().enumerate() {
        vecs.set_column(col, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Solve `M x = b` by LU with partial pivoting.
pub fn solve(m: &CMat, b: &CVec, what: &'static str) -> Result<CVec> {
    m.clone()
        .lu()
        .solve(b)
        .ok_or(Error::SingularSolve(what))
}

/// Solve `M X = B` by LU with partial pivoting.
pub fn solve_mat(m: &CMat, b: &CMat, what: &'static str) -> Result<CMat> {
    m.clone()
        .lu()
        .solve(b)
        .ok_or(Error::SingularSolve(what))
}

/// Maximum absolute entry, used for cheap finiteness and zero checks.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}
