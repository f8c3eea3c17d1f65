//! Local Gaussian correlation and parametric-bootstrap copula identification.

mod local;
mod select;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{CountSeries, Error, Result};

pub use local::{local_gaussian_fit, LocalParams, MIN_SAMPLE};
pub use select::{
    copula_select, copula_select_with_params, default_grids, BootstrapRecord, CopulaSelection, DistanceCurve,
    FamilyGrid, Regeneration, SelectOptions,
};

/// Bandwidth multiplier applied to each coordinate's standard deviation.
pub const BANDWIDTH_FACTOR: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridSpec {
    /// `(k, k)` for `k = 1, …, max` with `max` the largest value in the data.
    DiagonalAuto,
    Points(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LgcField {
    pub grid: Vec<[f64; 2]>,
    pub params: Vec<LocalParams>,
    pub bandwidths: [f64; 2],
    /// Whether each local fit met the simplex tolerance.
    pub converged: Vec<bool>,
}

impl LgcField {
    pub fn rho(&self) -> Vec<f64> {
        self.params.iter().map(|g| g.rho).collect()
    }
}

/// `1.1 ×` the sample standard deviation (divide by `n − 1`) of each column.
pub fn default_bandwidths(data: &DMatrix<f64>) -> [f64; 2] {
    let n = data.nrows() as f64;
    let sd = |j: usize| {
        let m = data.column(j).mean();
        (data.column(j).iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    [BANDWIDTH_FACTOR * sd(0), BANDWIDTH_FACTOR * sd(1)]
}

/// Diagonal grid `(1, 1), …, (m, m)` with `m` the largest entry of `data`.
pub fn diagonal_grid(data: &DMatrix<f64>) -> Vec<[f64; 2]> {
    let top = data.iter().copied().fold(f64::NEG_INFINITY, f64::max).floor();
    if !(top >= 1.0) {
        return Vec::new();
    }
    (1..=top as u64).map(|k| [k as f64, k as f64]).collect()
}

/// Adds independent `U(−½, ½)` noise to every entry.
pub fn jitter<R: Rng + ?Sized>(data: &DMatrix<f64>, rng: &mut R) -> DMatrix<f64> {
    data.map(|v| v + rng.random::<f64>() - 0.5)
}

/// Local Gaussian fits along a grid with the default bandwidths.
///
/// Each point starts from the solution at the previous point; the first
/// starts from the global moments.
pub fn lgc_curve(data: &DMatrix<f64>, grid: &GridSpec) -> Result<LgcField> {
    let b = default_bandwidths(data);
    lgc_curve_with(data, grid, b)
}

pub fn lgc_curve_with(data: &DMatrix<f64>, grid: &GridSpec, bandwidths: [f64; 2]) -> Result<LgcField> {
    let global = local::validate(data, bandwidths)?;
    let points = match grid {
        GridSpec::DiagonalAuto => diagonal_grid(data),
        GridSpec::Points(p) => p.clone(),
    };
    if points.is_empty() {
        return Err(Error::Empty("LGC grid is empty".into()));
    }
    let mut params = Vec::with_capacity(points.len());
    let mut converged = Vec::with_capacity(points.len());
    let mut start = global;
    for &x in &points {
        let (g, ok) = local::fit_at(data, x, bandwidths, start)?;
        if !ok {
            log::debug!("local fit at ({}, {}) hit the evaluation budget", x[0], x[1]);
        }
        params.push(g);
        converged.push(ok);
        start = g;
    }
    Ok(LgcField { grid: points, params, bandwidths, converged })
}

/// [`lgc_curve`] on a count pair.
pub fn lgc_curve_counts(y: &CountSeries, grid: &GridSpec) -> Result<LgcField> {
    if y.p() != 2 {
        return Err(Error::Shape(format!("LGC needs a bivariate series, got p = {}", y.p())));
    }
    lgc_curve(&y.to_matrix(), grid)
}

/// `D_m = m⁻¹ Σ_j (ρ_obs,j − ρ*_j)²`.
pub fn lgc_distance(rho_obs: &[f64], rho_star: &[f64]) -> Result<f64> {
    if rho_obs.len() != rho_star.len() {
        return Err(Error::Shape(format!("fields have {} and {} points", rho_obs.len(), rho_star.len())));
    }
    if rho_obs.is_empty() {
        return Err(Error::Empty("distance needs at least one grid point".into()));
    }
    let m = rho_obs.len() as f64;
    Ok(rho_obs.iter().zip(rho_star).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_sample(n: usize, rho: f64, seed: u64) -> DMatrix<f64> {
        let mut rng = stream(seed, 0);
        let mut m = DMatrix::zeros(n, 2);
        for t in 0..n {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            m[(t, 0)] = z1;
            m[(t, 1)] = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
        }
        m
    }

    #[test]
    fn diagonal_grid_from_max_count() {
        let y = CountSeries::from_rows(&[[0u64, 3], [6, 1], [2, 2]]).unwrap();
        let g = diagonal_grid(&y.to_matrix());
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], [1.0, 1.0]);
        assert_eq!(g[5], [6.0, 6.0]);
    }

    #[test]
    fn bandwidth_rule() {
        // columns with sample sd 2 and 3
        let data = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 2.0, 3.0, 4.0, 6.0]);
        let b = default_bandwidths(&data);
        assert!((b[0] - 2.2).abs() < 1e-12 && (b[1] - 3.3).abs() < 1e-12);
    }

    #[test]
    fn constant_field_for_gaussian_data() {
        let data = gaussian_sample(3000, 0.5, 1);
        let grid = GridSpec::Points((-2..=2).map(|k| [k as f64 * 0.5, k as f64 * 0.5]).collect());
        let field = lgc_curve(&data, &grid).unwrap();
        for r in field.rho() {
            assert!((r - 0.5).abs() < 0.1, "{:?}", field.rho());
        }
    }

    #[test]
    fn distance_values() {
        assert_eq!(lgc_distance(&[0.2, 0.4], &[0.2, 0.4]).unwrap(), 0.0);
        assert!((lgc_distance(&[0.1, 0.2, 0.3], &[0.0, 0.1, 0.2]).unwrap() - 0.01).abs() < 1e-15);
        assert!((lgc_distance(&[0.3], &[0.0]).unwrap() - 0.09).abs() < 1e-15);
        assert!(lgc_distance(&[0.3], &[0.0, 1.0]).is_err());
        assert!(lgc_distance(&[], &[]).is_err());
    }

    #[test]
    fn empty_grid_is_an_error() {
        let data = gaussian_sample(100, 0.0, 2).map(|v| v - 10.0);
        assert!(lgc_curve(&data, &GridSpec::DiagonalAuto).is_err());
    }

    #[test]
    fn swapping_columns_swaps_margins() {
        let data = gaussian_sample(500, 0.3, 3).map(|v| 3.0 + v);
        let mut swapped = data.clone();
        swapped.swap_columns(0, 1);
        let pts: Vec<[f64; 2]> = (1..=5).map(|k| [k as f64, k as f64]).collect();
        let a = lgc_curve(&data, &GridSpec::Points(pts.clone())).unwrap();
        let b = lgc_curve(&swapped, &GridSpec::Points(pts)).unwrap();
        for (g, h) in a.params.iter().zip(&b.params) {
            assert!((g.rho - h.rho).abs() < 1e-4, "{g:?} vs {h:?}");
            assert!((g.mu1 - h.mu2).abs() < 1e-3 && (g.sigma1 - h.sigma2).abs() < 1e-3);
        }
    }

    proptest! {
        #[test]
        fn distance_is_nonnegative(v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..30)) {
            let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let d = lgc_distance(&a, &b).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d == 0.0, a == b);
        }
    }
}
