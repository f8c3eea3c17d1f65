//! Multivariate count time series with Poisson marginals.
//!
//! Cross-sectional dependence enters through a copula imposed on the waiting
//! times of the component Poisson processes, so every component stays exactly
//! Poisson given its intensity. The conditional means follow either a linear
//! recursion `λ_t = d + A λ_{t-1} + B Y_{t-1}` or a log-linear recursion
//! `ν_t = d + A ν_{t-1} + B log(Y_{t-1} + 1)` with `λ_t = exp(ν_t)`.
//!
//! Parameters are estimated by maximizing the Poisson quasi-likelihood that
//! treats components as contemporaneously independent; the copula never
//! enters the likelihood and standard errors come from the sandwich
//! `H⁻¹ G H⁻¹`.

pub mod copula;
pub mod diagnostics;
mod error;
pub mod inference;
pub mod lgc;
pub mod linalg;
pub mod model;
pub mod normal;
pub mod presets;
pub mod rng;
pub mod simulate;
pub mod stationarity;

pub use error::{Error, Result};
pub use model::{CountSeries, IntensityPath, ModelKind, ModelParams, Scale};
