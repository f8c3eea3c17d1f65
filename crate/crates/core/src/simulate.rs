//! Sample paths of the copula-Poisson count models.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::copula::{CopulaSampler, CopulaSpec};
use crate::model::{unconditional_mean_linear, CountSeries, IntensityPath, ModelKind, ModelParams};
use crate::rng;
use crate::stationarity::{check_conditions, DEFAULT_SERIES_MAX_J, DEFAULT_SERIES_TOL};
use crate::{Error, Result};

pub const DEFAULT_BURN_IN: usize = 500;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// Stationary mean for the linear model (falling back to `d` when it does
    /// not exist), zero for the log-linear model.
    #[default]
    Auto,
    Given(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}

fn default_seed() -> u64 {
    rng::DEFAULT_SEED
}

impl SimulationConfig {
    pub fn new(n: usize) -> Self {
        Self { n, burn_in: DEFAULT_BURN_IN, initial_state: InitialState::Auto, seed: rng::DEFAULT_SEED }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_initial_state(mut self, state: Vec<f64>) -> Self {
        self.initial_state = InitialState::Given(state);
        self
    }
}

fn initial_state(params: &ModelParams, init: &InitialState) -> Result<Vec<f64>> {
    let p = params.p();
    match init {
        InitialState::Given(v) => {
            if v.len() != p {
                return Err(Error::Shape(format!("initial state has length {}, expected {p}", v.len())));
            }
            if params.kind() == ModelKind::Linear && v.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::InvalidParameter("linear initial intensity must be positive".into()));
            }
            Ok(v.clone())
        }
        InitialState::Auto => match params.kind() {
            ModelKind::Linear => Ok(unconditional_mean_linear(params)
                .ok()
                .filter(|m| m.iter().all(|&x| x > 0.0))
                .unwrap_or_else(|| params.d().as_slice().to_vec())),
            ModelKind::LogLinear => Ok(vec![0.0; p]),
        },
    }
}

/// Runs `burn_in + n` steps and keeps the last `n`.
///
/// Row `t` of the returned intensity path is the state that generated row `t`
/// of the counts. Parameter sets failing the stationarity conditions are
/// simulated anyway with a logged warning.
pub fn simulate_path<R: Rng + ?Sized>(
    params: &ModelParams,
    spec: CopulaSpec,
    config: &SimulationConfig,
    rng: &mut R,
) -> Result<(CountSeries, IntensityPath)> {
    let p = params.p();
    let sampler = CopulaSampler::new(spec, p)?;
    let kind = params.kind();
    if !check_conditions(params, DEFAULT_SERIES_TOL, DEFAULT_SERIES_MAX_J)
        .condition("perturbation")
        .is_some_and(|c| c.holds)
    {
        log::warn!("parameters violate the stationarity condition; the path may diverge");
    }

    let mut state = initial_state(params, &config.initial_state)?;
    let mut next = vec![0.0; p];
    let mut input = vec![0.0; p];
    let mut lambda = vec![0.0; p];
    let mut counts = Vec::with_capacity(config.n * p);
    let mut path = Vec::with_capacity(config.n * p);

    let total = config.burn_in + config.n;
    for t in 0..total {
        for i in 0..p {
            lambda[i] = match kind {
                ModelKind::Linear => state[i],
                ModelKind::LogLinear => state[i].exp(),
            };
            if !(lambda[i] > 0.0) || !lambda[i].is_finite() {
                return Err(Error::NonPositiveIntensity { t, component: i, value: lambda[i] });
            }
        }
        let y = sampler.poisson_draw(&lambda, rng)?;
        if t >= config.burn_in {
            counts.extend_from_slice(&y);
            path.extend_from_slice(&state);
        }
        for i in 0..p {
            input[i] = kind.feedback(y[i] as f64);
        }
        params.step_into(&state, &input, &mut next);
        std::mem::swap(&mut state, &mut next);
    }

    let counts = CountSeries::new(p, counts)?;
    let path = IntensityPath::new(p, path, kind.scale())?;
    Ok((counts, path))
}

/// [`simulate_path`] on the stream derived from `config.seed`.
pub fn simulate(
    params: &ModelParams,
    spec: CopulaSpec,
    config: &SimulationConfig,
) -> Result<(CountSeries, IntensityPath)> {
    let mut rng = rng::stream(config.seed, 0);
    simulate_path(params, spec, config, &mut rng)
}
