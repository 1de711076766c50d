//! Periodic spatial grids, thick control sets, and the band-limited
//! spectral inequality, all on the torus `[0, L)^N`.

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// Uniform grid on the torus, together with its discrete Fourier modes.
///
/// Frequencies enumerate the full dual group `k in {-P/2, ..., P/2 - 1}`
/// per axis (half-open to keep the discrete transform unitary), so the
/// plane waves `e^{i xi_k x} / sqrt(L^N)` are exactly orthonormal in the
/// cell-weighted inner product.
#[derive(Debug, Clone)]
pub struct PeriodicGrid {
    n_dim: usize,
    l: f64,
    points_per_axis: usize,
    frequencies: Vec<Vec<i64>>,
}

impl PeriodicGrid {
    pub fn new(n_dim: usize, l: f64, points_per_axis: usize) -> Result<Self> {
        if n_dim != 1 && n_dim != 2 {
            return Err(Error::InvalidParameter(format!(
                "spatial dimension must be 1 or 2, got {n_dim}"
            )));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "period must be positive and finite, got {l}"
            )));
        }
        let p = points_per_axis;
        if p < 2 || !p.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "points per axis must be a power of two >= 2, got {p}"
            )));
        }
        let half = (p / 2) as i64;
        let axis: Vec<i64> = (-half..half).collect();
        let mut frequencies = Vec::with_capacity(p.pow(n_dim as u32));
        if n_dim == 1 {
            for &k in &axis {
                frequencies.push(vec![k]);
            }
        } else {
            for &k0 in &axis {
                for &k1 in &axis {
                    frequencies.push(vec![k0, k1]);
                }
            }
        }
        Ok(Self {
            n_dim,
            l,
            points_per_axis: p,
            frequencies,
        })
    }

    pub fn n_dim(&self) -> usize {
        self.n_dim
    }

    pub fn period(&self) -> f64 {
        self.l
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn total_modes(&self) -> usize {
        self.frequencies.len()
    }

    pub fn frequencies(&self) -> &[Vec<i64>] {
        &self.frequencies
    }

    /// Physical wave vector `xi = 2 pi k / L` of mode `idx`.
    pub fn xi(&self, idx: usize) -> Vec<f64> {
        self.frequencies[idx]
            .iter()
            .map(|&k| 2.0 * std::f64::consts::PI * k as f64 / self.l)
            .collect()
    }

    pub fn xi_norm_sq(&self, idx: usize) -> f64 {
        self.xi(idx).iter().map(|x| x * x).sum()
    }

    /// Sup-norm of the wave vector, the band-limit measure.
    pub fn xi_norm_inf(&self, idx: usize) -> f64 {
        self.xi(idx).iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn spacing(&self) -> f64 {
        self.l / self.points_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.n_dim as i32)
    }

    pub fn total_points(&self) -> usize {
        self.points_per_axis.pow(self.n_dim as u32)
    }

    /// Coordinates of grid point `idx` (row-major over axes).
    pub fn point(&self, idx: usize) -> Vec<f64> {
        let h = self.spacing();
        match self.n_dim {
            1 => vec![idx as f64 * h],
            _ => {
                let p = self.points_per_axis;
                vec![(idx / p) as f64 * h, (idx % p) as f64 * h]
            }
        }
    }

    /// Mode indices with `|xi|_inf <= bound` (within rounding slack).
    pub fn band_modes(&self, bound: f64) -> Vec<usize> {
        (0..self.total_modes())
            .filter(|&i| self.xi_norm_inf(i) <= bound * (1.0 + 1e-12) + 1e-12)
            .collect()
    }

    /// Mode indices with integer wave vector `|k|_inf <= kmax`.
    pub fn modes_with_max_abs_k(&self, kmax: i64) -> Vec<usize> {
        (0..self.total_modes())
            .filter(|&i| self.frequencies[i].iter().all(|&k| k.abs() <= kmax))
            .collect()
    }

    /// Unitary matrix of orthonormal plane-wave columns sampled on the grid.
    pub fn mode_matrix(&self) -> CMat {
        let np = self.total_points();
        let nm = self.total_modes();
        let scale = 1.0 / (np as f64).sqrt();
        CMat::from_fn(np, nm, |j, a| {
            let x = self.point(j);
            let xi = self.xi(a);
            let phase: f64 = xi.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            C64::new(0.0, phase).exp() * scale
        })
    }
}

/// A candidate thick control set on a grid.
#[derive(Debug, Clone)]
pub struct ThickSetSpec {
    pub indicator: Vec<bool>,
    pub epsilon: f64,
    pub l_cube: f64,
}

impl ThickSetSpec {
    pub fn new(indicator: Vec<bool>, epsilon: f64, l_cube: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "thickness fraction must lie in (0, 1], got {epsilon}"
            )));
        }
        if !(l_cube > 0.0) || !l_cube.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "cube side must be positive, got {l_cube}"
            )));
        }
        Ok(Self {
            indicator,
            epsilon,
            l_cube,
        })
    }

    /// Points covered by a union of half-open intervals per axis
    /// (2-D sets are products of the two axis patterns).
    pub fn from_intervals(
        grid: &PeriodicGrid,
        intervals_per_axis: &[Vec<(f64, f64)>],
        epsilon: f64,
        l_cube: f64,
    ) -> Result<Self> {
        if intervals_per_axis.len() != grid.n_dim() {
            return Err(Error::InvalidParameter(format!(
                "expected {} axis interval lists, got {}",
                grid.n_dim(),
                intervals_per_axis.len()
            )));
        }
        let l = grid.period();
        for ivs in intervals_per_axis {
            for &(a, b) in ivs {
                if !(a.is_finite() && b.is_finite()) || a >= b || a < 0.0 || b > l + 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "interval [{a}, {b}) must sit inside [0, {l})"
                    )));
                }
            }
        }
        let covered = |axis: usize, x: f64| {
            intervals_per_axis[axis]
                .iter()
                .any(|&(a, b)| x >= a - 1e-12 && x < b - 1e-12)
        };
        let indicator = (0..grid.total_points())
            .map(|j| {
                let x = grid.point(j);
                x.iter().enumerate().all(|(axis, &xi)| covered(axis, xi))
            })
            .collect();
        Self::new(indicator, epsilon, l_cube)
    }
}

/// Indicator of the full domain.
pub fn indicator_full(grid: &PeriodicGrid) -> Vec<bool> {
    vec![true; grid.total_points()]
}

/// Indicator of the leading `fill_fraction` of each of `cells_per_axis`
/// equal periodic cells, applied per axis.
pub fn indicator_periodic_cells(
    grid: &PeriodicGrid,
    cells_per_axis: usize,
    fill_fraction: f64,
) -> Vec<bool> {
    let l = grid.period();
    let cell = l / cells_per_axis as f64;
    let inside = |x: f64| {
        let frac = (x / cell).fract();
        frac < fill_fraction - 1e-12
    };
    (0..grid.total_points())
        .map(|j| grid.point(j).iter().all(|&x| inside(x)))
        .collect()
}

/// Indicator of the half-domain `x_0 < L/2`.
pub fn indicator_left_half(grid: &PeriodicGrid) -> Vec<bool> {
    let half = grid.period() / 2.0;
    (0..grid.total_points())
        .map(|j| grid.point(j)[0] < half - 1e-12)
        .collect()
}

/// Outcome of the exhaustive thickness scan.
#[derive(Debug, Clone)]
pub struct ThicknessReport {
    pub ok: bool,
    /// Anchor cell (per-axis index) of the cube with least measure.
    pub worst_anchor: Vec<usize>,
    pub worst_measure: f64,
    pub required: f64,
}

/// Check `|omega ∩ Q| >= epsilon |Q|` over every grid-aligned cube of side
/// `l_cube`, with periodic wraparound.
pub fn verify_thickness(grid: &PeriodicGrid, spec: &ThickSetSpec) -> Result<ThicknessReport> {
    if spec.indicator.len() != grid.total_points() {
        return Err(Error::DimensionMismatch(format!(
            "indicator has {} entries, grid has {} points",
            spec.indicator.len(),
            grid.total_points()
        )));
    }
    if spec.l_cube > grid.period() * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "cube side {} exceeds the period {}",
            spec.l_cube,
            grid.period()
        )));
    }
    let p = grid.points_per_axis();
    let w = ((spec.l_cube / grid.spacing()).round() as usize).clamp(1, p);
    let required = spec.epsilon * spec.l_cube.powi(grid.n_dim() as i32);
    let cell_vol = grid.cell_volume();

    let mut worst = usize::MAX;
    let mut worst_anchor = vec![0usize; grid.n_dim()];
    if grid.n_dim() == 1 {
        for anchor in 0..p {
            let count = (0..w)
                .filter(|&o| spec.indicator[(anchor + o) % p])
                .count();
            if count < worst {
                worst = count;
                worst_anchor = vec![anchor];
            }
        }
    } else {
        for a0 in 0..p {
            for a1 in 0..p {
                let mut count = 0usize;
                for o0 in 0..w {
                    let r = ((a0 + o0) % p) * p;
                    for o1 in 0..w {
                        if spec.indicator[r + (a1 + o1) % p] {
                            count += 1;
                        }
                    }
                }
                if count < worst {
                    worst = count;
                    worst_anchor = vec![a0, a1];
                }
            }
        }
    }
    let worst_measure = worst as f64 * cell_vol;
    Ok(ThicknessReport {
        ok: worst_measure >= required - 1e-12 * required.max(1.0),
        worst_anchor,
        worst_measure,
        required,
    })
}

/// Fourier-side matrix of multiplication by an indicator, compressed to a
/// mode subset: `C[a, b] = (1/P^N) sum_j chi_j e^{i (xi_b - xi_a) x_j}`.
/// Hermitian; an exact orthogonal projection when the subset is the full
/// dual group.
pub fn indicator_multiplier(grid: &PeriodicGrid, indicator: &[bool], modes: &[usize]) -> CMat {
    let k = modes.len();
    let np = grid.total_points() as f64;
    let marked: Vec<Vec<f64>> = (0..grid.total_points())
        .filter(|&j| indicator[j])
        .map(|j| grid.point(j))
        .collect();
    let xis: Vec<Vec<f64>> = modes.iter().map(|&m| grid.xi(m)).collect();
    let mut c = CMat::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let mut acc = C64::new(0.0, 0.0);
            for x in &marked {
                let phase: f64 = xis[b]
                    .iter()
                    .zip(xis[a].iter())
                    .zip(x.iter())
                    .map(|((xb, xa), xj)| (xb - xa) * xj)
                    .sum();
                acc += C64::new(0.0, phase).exp();
            }
            acc /= np;
            c[(a, b)] = acc;
            c[(b, a)] = acc.conj();
        }
    }
    c
}

/// Restriction constant of the band `{|xi|_inf <= r}`: the smallest `C`
/// with `||f|| <= C ||chi_omega f||` for band-limited `f`, computed as the
/// reciprocal of the smallest singular value of the restricted sampling
/// map. Returns infinity when the set cannot see the band at this grid.
pub fn spectral_inequality_constant(
    grid: &PeriodicGrid,
    spec: &ThickSetSpec,
    r: f64,
) -> Result<f64> {
    if spec.indicator.len() != grid.total_points() {
        return Err(Error::DimensionMismatch(format!(
            "indicator has {} entries, grid has {} points",
            spec.indicator.len(),
            grid.total_points()
        )));
    }
    let xi_min = 2.0 * std::f64::consts::PI / grid.period();
    if r < xi_min * (1.0 - 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "band limit {r} lies below the smallest nonzero frequency {xi_min}"
        )));
    }
    let modes = grid.band_modes(r);
    let np = grid.total_points();
    let scale = 1.0 / (np as f64).sqrt();
    let m = CMat::from_fn(np, modes.len(), |j, a| {
        if spec.indicator[j] {
            let x = grid.point(j);
            let xi = grid.xi(modes[a]);
            let phase: f64 = xi.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            C64::new(0.0, phase).exp() * scale
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let s_min = linalg::min_singular_value(&m);
    if s_min <= 1e-12 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / s_min)
}
