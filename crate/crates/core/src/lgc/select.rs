//! Parametric-bootstrap copula identification.
//!
//! 1. Take a fitted model for the observed pair.
//! 2. For every candidate `(family, φ)`, simulate a synthetic pair of the
//!    observed length from the fitted parameters.
//! 3. Estimate local Gaussian correlations of observed and synthetic data on
//!    the diagonal grid built from the observed data.
//! 4. Score each candidate by the mean squared difference `D_m`.
//! 5. Pick the minimizer; with `B > 1` repeat 2–5 on fresh streams and
//!    summarize the votes.
//!
//! Within one replication every `φ` of a family reuses the same random
//! stream, which keeps `D_m(φ)` smooth in `φ`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{default_bandwidths, diagonal_grid, jitter, lgc_curve_with, lgc_distance, GridSpec};
use crate::copula::{CopulaFamily, CopulaSampler, CopulaSpec};
use crate::inference::filter_intensity;
use crate::inference::FitResult;
use crate::rng::{self, stream};
use crate::simulate::{simulate_path, SimulationConfig, DEFAULT_BURN_IN};
use crate::{CountSeries, Error, ModelKind, ModelParams, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyGrid {
    pub family: CopulaFamily,
    pub phis: Vec<f64>,
}

impl FamilyGrid {
    /// `start, start + step, …` up to and including `end` (within rounding).
    pub fn range(family: CopulaFamily, start: f64, end: f64, step: f64) -> Self {
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        let phis = (0..count).map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12).collect();
        Self { family, phis }
    }
}

/// Clayton `0.5, 0.75, …, 8` and Gaussian `−0.95, −0.9, …, 0.95`.
///
/// The Gaussian endpoints ±1 are degenerate copulas and are left out.
pub fn default_grids() -> Vec<FamilyGrid> {
    vec![
        FamilyGrid::range(CopulaFamily::Clayton, 0.5, 8.0, 0.25),
        FamilyGrid::range(CopulaFamily::Gaussian, -0.95, 0.95, 0.05),
    ]
}

/// How synthetic series are generated for a candidate copula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regeneration {
    /// Fresh paths from the fitted recursion, intensities included.
    Unconditional,
    /// Counts drawn at the fitted intensities `λ̂_t` of the observed series.
    #[default]
    FittedIntensity,
}

impl std::str::FromStr for Regeneration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unconditional" => Ok(Regeneration::Unconditional),
            "fitted-intensity" => Ok(Regeneration::FittedIntensity),
            other => Err(Error::InvalidParameter(format!("unknown regeneration mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectOptions {
    pub grids: Vec<FamilyGrid>,
    /// Number of bootstrap generations `B`.
    pub replications: usize,
    pub seed: u64,
    /// Burn-in for [`Regeneration::Unconditional`] paths.
    pub burn_in: usize,
    /// Add `U(−½, ½)` noise to observed and synthetic counts before LGC.
    pub jitter: bool,
    pub regeneration: Regeneration,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self {
            grids: default_grids(),
            replications: 1,
            seed: rng::DEFAULT_SEED,
            burn_in: DEFAULT_BURN_IN,
            jitter: false,
            regeneration: Regeneration::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceCurve {
    pub family: CopulaFamily,
    pub phis: Vec<f64>,
    /// `D_m` per `φ`, averaged over bootstrap generations.
    pub distances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRecord {
    pub replications: usize,
    pub votes: Vec<(CopulaFamily, usize)>,
    /// Mean of `φ̂` over generations that chose the modal family.
    pub phi_mean: f64,
    /// Standard deviation of those `φ̂` (divide by `k − 1`; zero when `k = 1`).
    pub phi_se: f64,
    /// Winning `(family, φ, D_m)` of every generation, in order.
    pub choices: Vec<(CopulaFamily, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaSelection {
    pub family: CopulaFamily,
    pub phi_hat: f64,
    pub distance: f64,
    pub curves: Vec<DistanceCurve>,
    pub grid: Vec<[f64; 2]>,
    pub rho_observed: Vec<f64>,
    pub bootstrap: Option<BootstrapRecord>,
}

impl CopulaSelection {
    pub fn spec(&self) -> CopulaSpec {
        CopulaSpec { family: self.family, phi: self.phi_hat }
    }
}

/// Parameters used to regenerate data: the estimate itself, except that
/// negative entries of `A` and `B` in a linear fit are set to zero so the
/// simulated intensity stays positive on any path.
fn simulation_params(p: &ModelParams) -> Result<ModelParams> {
    if p.kind() == ModelKind::Linear && !p.respects_signs() {
        log::warn!("negative entries of the linear estimate are set to zero for regeneration");
        let d = p.d().map(|v| v.max(1e-8));
        return ModelParams::new(d, p.a().map(|v| v.max(0.0)), p.b().map(|v| v.max(0.0)), ModelKind::Linear);
    }
    Ok(p.clone())
}

fn prepared(y: &DMatrix<f64>, use_jitter: bool, seed: u64, index: u64) -> DMatrix<f64> {
    if use_jitter {
        jitter(y, &mut stream(seed ^ 0x6a09_e667_f3bc_c908, index))
    } else {
        y.clone()
    }
}

/// Runs the selection for a bivariate count series and its fitted model.
pub fn copula_select(y: &CountSeries, fitted: &FitResult, options: &SelectOptions) -> Result<CopulaSelection> {
    copula_select_with_params(y, &fitted.params, options)
}

/// [`copula_select`] from estimated parameters alone, e.g. read back from a report.
pub fn copula_select_with_params(
    y: &CountSeries,
    fitted: &ModelParams,
    options: &SelectOptions,
) -> Result<CopulaSelection> {
    if y.p() != 2 {
        return Err(Error::Shape(format!("copula selection is bivariate, got p = {}", y.p())));
    }
    if fitted.p() != 2 {
        return Err(Error::Shape("fitted model is not bivariate".into()));
    }
    if options.grids.is_empty() || options.grids.iter().any(|g| g.phis.is_empty()) {
        return Err(Error::Empty("every family needs at least one φ".into()));
    }
    if options.replications == 0 {
        return Err(Error::InvalidParameter("need at least one bootstrap generation".into()));
    }
    for g in &options.grids {
        for &phi in &g.phis {
            CopulaSpec { family: g.family, phi }.validate(2)?;
        }
    }
    let observed = prepared(&y.to_matrix(), options.jitter, options.seed, u64::MAX);
    let grid = diagonal_grid(&y.to_matrix());
    if grid.is_empty() {
        return Err(Error::Empty("observed counts never exceed zero; LGC grid is empty".into()));
    }
    let points = GridSpec::Points(grid.clone());
    let rho_observed = lgc_curve_with(&observed, &points, default_bandwidths(&observed))?.rho();

    let config = SimulationConfig::new(y.n()).with_burn_in(options.burn_in);
    let (params, fitted_path) = match options.regeneration {
        Regeneration::Unconditional => (simulation_params(fitted)?, None),
        Regeneration::FittedIntensity => (fitted.clone(), Some(filter_intensity(fitted, y)?.to_means())),
    };
    let tasks: Vec<(usize, usize, usize)> = (0..options.replications)
        .flat_map(|b| {
            options.grids.iter().enumerate().flat_map(move |(f, g)| (0..g.phis.len()).map(move |k| (b, f, k)))
        })
        .collect();
    let n_families = options.grids.len() as u64;
    let distances: Vec<f64> = tasks
        .par_iter()
        .map(|&(b, f, k)| -> Result<f64> {
            let g = &options.grids[f];
            let spec = CopulaSpec { family: g.family, phi: g.phis[k] };
            let index = b as u64 * n_families + f as u64;
            let mut rng = stream(options.seed, index);
            let synthetic = match &fitted_path {
                None => simulate_path(&params, spec, &config, &mut rng)?.0,
                Some(path) => {
                    let sampler = CopulaSampler::new(spec, 2)?;
                    let mut values = Vec::with_capacity(2 * path.n());
                    for t in 0..path.n() {
                        values.extend(sampler.poisson_draw(path.row(t), &mut rng)?);
                    }
                    CountSeries::new(2, values)?
                }
            };
            let data = prepared(&synthetic.to_matrix(), options.jitter, options.seed, index);
            let field = lgc_curve_with(&data, &points, default_bandwidths(&data))?;
            lgc_distance(&rho_observed, &field.rho())
        })
        .collect::<Result<_>>()?;

    // per generation: distances laid out family by family
    let per_gen: usize = options.grids.iter().map(|g| g.phis.len()).sum();
    let mut choices = Vec::with_capacity(options.replications);
    for b in 0..options.replications {
        let block = &distances[b * per_gen..(b + 1) * per_gen];
        let mut best: Option<(CopulaFamily, f64, f64)> = None;
        let mut offset = 0;
        for g in &options.grids {
            for (k, &phi) in g.phis.iter().enumerate() {
                let d = block[offset + k];
                if best.is_none_or(|(_, _, bd)| d < bd) {
                    best = Some((g.family, phi, d));
                }
            }
            offset += g.phis.len();
        }
        choices.push(best.expect("nonempty grids"));
    }

    let mut curves = Vec::with_capacity(options.grids.len());
    let mut offset = 0;
    for g in &options.grids {
        let distances = (0..g.phis.len())
            .map(|k| {
                (0..options.replications).map(|b| distances[b * per_gen + offset + k]).sum::<f64>()
                    / options.replications as f64
            })
            .collect();
        curves.push(DistanceCurve { family: g.family, phis: g.phis.clone(), distances });
        offset += g.phis.len();
    }

    let votes: Vec<(CopulaFamily, usize)> =
        options.grids.iter().map(|g| (g.family, choices.iter().filter(|c| c.0 == g.family).count())).collect();
    // modal family; ties go to the family listed first
    let family = votes.iter().fold(votes[0], |acc, &v| if v.1 > acc.1 { v } else { acc }).0;
    let winners: Vec<&(CopulaFamily, f64, f64)> = choices.iter().filter(|c| c.0 == family).collect();
    let k = winners.len() as f64;
    let phi_mean = winners.iter().map(|c| c.1).sum::<f64>() / k;
    let phi_se = if winners.len() > 1 {
        (winners.iter().map(|c| (c.1 - phi_mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    let distance = winners.iter().map(|c| c.2).sum::<f64>() / k;
    let bootstrap = (options.replications > 1).then(|| BootstrapRecord {
        replications: options.replications,
        votes,
        phi_mean,
        phi_se,
        choices: choices.clone(),
    });
    Ok(CopulaSelection { family, phi_hat: phi_mean, distance, curves, grid, rho_observed, bootstrap })
}
