//! Run configuration: command-line flags over config-file keys over
//! environment over built-in defaults.
//!
//! Config files are TOML (`.toml`) or JSON (`.json`) with the same keys as
//! the long flags, written in snake_case:
//!
//! ```toml
//! input = "counts.csv"
//! output = "out"
//! model = "linear"
//! copula = "clayton"
//! phi = 2.0
//! n = 1000
//! seed = 7
//!
//! [params]
//! d = [1.0, 2.0]
//! a = [[0.3, 0.0], [0.0, 0.25]]
//! b = [[0.5, 0.0], [0.0, 0.4]]
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use countflow_core::copula::{CopulaFamily, CopulaSpec};
use countflow_core::inference::{diagonal_mask, FitOptions, HessianForm, Positivity};
use countflow_core::lgc::{default_grids, FamilyGrid, Regeneration, SelectOptions};
use countflow_core::rng::DEFAULT_SEED;
use countflow_core::simulate::{SimulationConfig, DEFAULT_BURN_IN};
use countflow_core::{presets, ModelKind, ModelParams};
use serde::{Deserialize, Serialize};

pub const SEED_ENV: &str = "COUNTFLOW_SEED";
pub const WORKERS_ENV: &str = "COUNTFLOW_WORKERS";

pub const DEFAULT_N: usize = 1000;
pub const DEFAULT_MAX_LAG: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    /// Simulate counts from a model and copula
    Simulate,
    /// Quasi-maximum likelihood fit of a counts CSV
    Fit,
    /// Evaluate the stationarity conditions of a parameter set
    CheckStationarity,
    /// Residual correlograms and cumulative periodograms
    Diagnose,
    /// Identify the copula family by local Gaussian correlation
    CopulaSelect,
}

impl std::fmt::Display for CommandKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v = self.to_possible_value().expect("no skipped variants");
        f.write_str(v.get_name())
    }
}

/// Parameter matrices given row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub d: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

impl ParamsSpec {
    pub fn to_params(&self, kind: ModelKind) -> Result<ModelParams> {
        let a: Vec<&[f64]> = self.a.iter().map(Vec::as_slice).collect();
        let b: Vec<&[f64]> = self.b.iter().map(Vec::as_slice).collect();
        Ok(ModelParams::from_rows(&self.d, &a, &b, kind)?)
    }
}

/// Settings shared by flags and config files. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Counts CSV to read
    #[arg(long, short)]
    pub input: Option<PathBuf>,
    /// Fit report (JSON) written by `fit`
    #[arg(long = "fit")]
    pub fit_report: Option<PathBuf>,
    /// Output directory, created if missing
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// linear or log-linear
    #[arg(long)]
    pub model: Option<ModelKind>,
    /// Named parameter set (linear-diagonal, linear-coupled, loglinear-diagonal, loglinear-persistent)
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(skip)]
    pub params: Option<ParamsSpec>,
    /// independence, gaussian or clayton
    #[arg(long)]
    pub copula: Option<CopulaFamily>,
    /// Copula parameter
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<f64>,
    /// Number of simulated time points
    #[arg(long)]
    pub n: Option<usize>,
    /// Discarded leading simulation steps
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Also write the simulated intensity path
    #[arg(long)]
    pub write_intensity: Option<bool>,
    /// Master seed; overrides COUNTFLOW_SEED
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for replication-level parallelism
    #[arg(long)]
    pub workers: Option<usize>,
    /// intensity or log-transform
    #[arg(long)]
    pub positivity: Option<Positivity>,
    /// expected or observed
    #[arg(long)]
    pub hessian: Option<HessianForm>,
    /// Fit with diagonal A and B only
    #[arg(long)]
    pub diagonal: Option<bool>,
    /// Largest correlogram lag
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Bootstrap generations for copula selection
    #[arg(long)]
    pub replications: Option<usize>,
    /// Jitter counts with U(-1/2, 1/2) noise before local Gaussian fits
    #[arg(long)]
    pub jitter: Option<bool>,
    /// unconditional or fitted-intensity
    #[arg(long)]
    pub regeneration: Option<Regeneration>,
    /// Clayton grid as start,end,step
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub clayton_grid: Option<Vec<f64>>,
    /// Gaussian grid as start,end,step
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub gaussian_grid: Option<Vec<f64>>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr; $($f:ident),*) => {
        Settings { $($f: $hi.$f.or($lo.$f),)* }
    };
}

impl Settings {
    /// Keys set in `self` win over those in `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        overlay!(self, lower; input, fit_report, output, model, preset, params, copula, phi, n, burn_in,
            write_intensity, seed, workers, positivity, hessian, diagonal, max_lag, replications, jitter,
            regeneration, clayton_grid, gaussian_grid)
    }

    pub fn from_file(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => {
                serde_json::from_str(&text).with_context(|| format!("invalid JSON config {}", path.display()))
            }
            Some("toml") => toml::from_str(&text).with_context(|| format!("invalid TOML config {}", path.display())),
            _ => bail!("config file {} must end in .toml or .json", path.display()),
        }
    }
}

/// Environment values that feed the defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Environment {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl Environment {
    pub fn from_process() -> Result<Self> {
        let read = |key: &str| -> Result<Option<u64>> {
            match std::env::var(key) {
                Ok(v) => v.trim().parse().map(Some).with_context(|| format!("{key}='{v}' is not an integer")),
                Err(_) => Ok(None),
            }
        };
        Ok(Self { seed: read(SEED_ENV)?, workers: read(WORKERS_ENV)?.map(|w| w as usize) })
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: CommandKind,
    pub input: Option<PathBuf>,
    pub fit_report: Option<PathBuf>,
    pub output: PathBuf,
    pub model: ModelKind,
    /// Explicit parameters from a preset or the `params` table.
    pub params: Option<ModelParams>,
    pub copula: CopulaSpec,
    pub simulation: SimulationConfig,
    pub write_intensity: bool,
    pub fit: FitOptions,
    /// Restrict `A` and `B` to their diagonals when fitting.
    pub diagonal: bool,
    pub seed: u64,
    pub workers: usize,
    pub max_lag: usize,
    pub select: SelectOptions,
}

fn grid(family: CopulaFamily, v: &[f64]) -> Result<FamilyGrid> {
    match v {
        [start, end, step] if *step > 0.0 && end >= start => Ok(FamilyGrid::range(family, *start, *end, *step)),
        _ => bail!("{family} grid must be start,end,step with step > 0 and end >= start"),
    }
}

impl RunConfig {
    pub fn resolve(command: CommandKind, s: Settings, env: &Environment) -> Result<Self> {
        let params = match (&s.preset, &s.params) {
            (Some(_), Some(_)) => bail!("give either a preset or a params table, not both"),
            (Some(name), None) => Some(
                presets::by_name(name)
                    .with_context(|| format!("unknown preset '{name}' (known: {})", presets::NAMES.join(", ")))?,
            ),
            (None, Some(spec)) => Some(spec.to_params(s.model.unwrap_or(ModelKind::Linear))?),
            (None, None) => None,
        };
        let model = match (&params, s.model) {
            (Some(p), Some(m)) if p.kind() != m => bail!("preset is {} but model {} was requested", p.kind(), m),
            (Some(p), _) => p.kind(),
            (None, m) => m.unwrap_or(ModelKind::Linear),
        };

        let family = s.copula.unwrap_or(CopulaFamily::Independence);
        let copula = CopulaSpec { family, phi: s.phi.unwrap_or(0.0) };
        if family != CopulaFamily::Independence && s.phi.is_none() {
            bail!("copula {family} needs --phi");
        }

        let seed = s.seed.or(env.seed).unwrap_or(DEFAULT_SEED);
        let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        let mut workers = s.workers.unwrap_or(available);
        if let Some(cap) = env.workers {
            workers = workers.min(cap);
        }
        if workers == 0 {
            bail!("worker count must be at least 1");
        }

        let simulation = SimulationConfig::new(s.n.unwrap_or(DEFAULT_N))
            .with_burn_in(s.burn_in.unwrap_or(DEFAULT_BURN_IN))
            .with_seed(seed);

        let fit = FitOptions {
            positivity: s.positivity.unwrap_or_default(),
            hessian: s.hessian.unwrap_or_default(),
            ..FitOptions::default()
        };

        let mut grids = default_grids();
        if let Some(v) = &s.clayton_grid {
            grids[0] = grid(CopulaFamily::Clayton, v)?;
        }
        if let Some(v) = &s.gaussian_grid {
            grids[1] = grid(CopulaFamily::Gaussian, v)?;
        }
        let select = SelectOptions {
            grids,
            replications: s.replications.unwrap_or(1),
            seed,
            burn_in: s.burn_in.unwrap_or(DEFAULT_BURN_IN),
            jitter: s.jitter.unwrap_or(false),
            regeneration: s.regeneration.unwrap_or_default(),
        };

        Ok(Self {
            command,
            input: s.input,
            fit_report: s.fit_report,
            output: s.output.unwrap_or_else(|| PathBuf::from(".")),
            model,
            params,
            copula,
            simulation,
            write_intensity: s.write_intensity.unwrap_or(false),
            fit,
            diagonal: s.diagonal.unwrap_or(false),
            seed,
            workers,
            max_lag: s.max_lag.unwrap_or(DEFAULT_MAX_LAG),
            select,
        })
    }

    /// Fit options for a `p`-variate series.
    pub fn fit_options(&self, p: usize) -> FitOptions {
        let mut o = self.fit.clone();
        if self.diagonal {
            o.mask = Some(diagonal_mask(p));
        }
        o
    }

    pub fn require_input(&self) -> Result<&Path> {
        self.input.as_deref().with_context(|| format!("`{}` needs --input", self.command))
    }
}
