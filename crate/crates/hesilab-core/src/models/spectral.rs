//! Diagonal truncations of Fourier-multiplier generators with indicator
//! control: Ginzburg-Landau and fractional heat on the periodic grid.

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::models::grid::{indicator_multiplier, PeriodicGrid, ThickSetSpec};
use crate::operator::ControlSystem;

/// A control system whose state operator is diagonal in a known
/// orthonormal mode basis.
#[derive(Debug, Clone)]
pub struct SpectralSystem {
    base: ControlSystem,
    eigenvalues: Vec<C64>,
    mode_labels: Vec<String>,
    basis_note: String,
}

impl SpectralSystem {
    pub fn base(&self) -> &ControlSystem {
        &self.base
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn mode_labels(&self) -> &[String] {
        &self.mode_labels
    }

    pub fn basis_note(&self) -> &str {
        &self.basis_note
    }

    pub fn into_base(self) -> ControlSystem {
        self.base
    }
}

fn assemble(
    grid: &PeriodicGrid,
    spec: &ThickSetSpec,
    eigenvalues: Vec<C64>,
    label: &str,
) -> Result<SpectralSystem> {
    if spec.indicator.len() != grid.total_points() {
        return Err(Error::DimensionMismatch(format!(
            "indicator has {} entries, grid has {} points",
            spec.indicator.len(),
            grid.total_points()
        )));
    }
    let n = grid.total_modes();
    let all: Vec<usize> = (0..n).collect();
    let b = indicator_multiplier(grid, &spec.indicator, &all);
    let a = CMat::from_diagonal(&CVec::from_vec(eigenvalues.clone()));
    let base = ControlSystem::new(a, b, label)?;
    let mode_labels = grid
        .frequencies()
        .iter()
        .map(|k| {
            k.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    Ok(SpectralSystem {
        base,
        eigenvalues,
        mode_labels,
        basis_note: format!(
            "orthonormal plane waves e^(i xi x)/sqrt(L^{}) on the period-{} torus",
            grid.n_dim(),
            grid.period()
        ),
    })
}

/// Linear Ginzburg-Landau generator `(a + ib) Laplacian` with indicator
/// control: mode `k` carries the eigenvalue `-(a + ib) |xi_k|^2`.
pub fn ginzburg_landau_system(
    a: f64,
    b: f64,
    grid: &PeriodicGrid,
    spec: &ThickSetSpec,
) -> Result<SpectralSystem> {
    if !(a > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "diffusion coefficient must satisfy a > 0, got a={a}, b={b}"
        )));
    }
    let eig: Vec<C64> = (0..grid.total_modes())
        .map(|i| {
            let s = grid.xi_norm_sq(i);
            C64::new(-a * s, -b * s)
        })
        .collect();
    assemble(grid, spec, eig, &format!("ginzburg-landau a={a} b={b}"))
}

/// Fractional heat generator `-(-Laplacian)^{s/2}`: mode `k` carries the
/// eigenvalue `-|xi_k|^s`. The zero mode is marginal and must be reached
/// by the control set.
pub fn fractional_heat_system(
    s: f64,
    grid: &PeriodicGrid,
    spec: &ThickSetSpec,
) -> Result<SpectralSystem> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fractional order must lie in (0, 1), got {s}"
        )));
    }
    let eig: Vec<C64> = (0..grid.total_modes())
        .map(|i| C64::new(-grid.xi_norm_sq(i).sqrt().powf(s), 0.0))
        .collect();
    assemble(grid, spec, eig, &format!("fractional-heat s={s}"))
}

/// Orthogonal spectral projector onto the modes whose eigenvalue real part
/// lies in `[-k, 0]`. Diagonal, hence idempotent, Hermitian, and commuting
/// with the state operator.
pub fn fractional_spectral_projection(sys: &SpectralSystem, k: f64) -> Result<CMat> {
    if !(k >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "spectral window must satisfy k >= 0, got {k}"
        )));
    }
    let n = sys.eigenvalues.len();
    let mut p = CMat::zeros(n, n);
    for (i, lam) in sys.eigenvalues.iter().enumerate() {
        if lam.re >= -k - 1e-12 && lam.re <= 1e-12 {
            p[(i, i)] = C64::new(1.0, 0.0);
        }
    }
    Ok(p)
}
