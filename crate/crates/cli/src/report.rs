//! Machine-readable records and their text renderings.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use countflow_core::inference::{theta_labels, ConvergenceStatus, FitResult, ThetaVector};
use countflow_core::stationarity::StationarityReport;
use countflow_core::{ModelKind, ModelParams};
use serde::{Deserialize, Serialize};

/// Bumped whenever a field of a record changes meaning or name.
pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub name: String,
    pub expression: String,
    pub value: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormsRecord {
    pub norm2_a_plus_b: f64,
    pub norm1_a_plus_norm1_b: f64,
    pub norm2_a_plus_norm2_b: f64,
    pub series_sum: f64,
    pub series_truncation_j: usize,
    pub series_converged: bool,
    pub conditions: Vec<ConditionRecord>,
}

impl From<&StationarityReport> for NormsRecord {
    fn from(r: &StationarityReport) -> Self {
        Self {
            norm2_a_plus_b: r.norm2_a_plus_b,
            norm1_a_plus_norm1_b: r.norm1_a_plus_norm1_b,
            norm2_a_plus_norm2_b: r.norm2_a_plus_norm2_b,
            series_sum: r.series_sum,
            series_truncation_j: r.series_truncation_j,
            series_converged: r.series_converged,
            conditions: r
                .conditions
                .iter()
                .map(|c| ConditionRecord {
                    name: c.name.to_string(),
                    expression: c.expression.to_string(),
                    value: c.value,
                    holds: c.holds,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub status: ConvergenceStatus,
    pub iterations: usize,
    pub gradient_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub version: u32,
    pub model: ModelKind,
    pub components: Vec<String>,
    pub n: usize,
    /// Names of the entries of `theta`: `d1, …, a11, a21, …, b11, b21, …`.
    pub parameters: Vec<String>,
    pub theta: Vec<f64>,
    pub se: Vec<f64>,
    pub free: Vec<bool>,
    pub loglik: f64,
    pub convergence: ConvergenceRecord,
    pub norms: NormsRecord,
}

impl FitReport {
    pub fn new(fit: &FitResult, components: Vec<String>, norms: &StationarityReport) -> Self {
        Self {
            version: RECORD_VERSION,
            model: fit.kind,
            components,
            n: fit.n,
            parameters: fit.theta_hat.labels(),
            theta: fit.theta_hat.as_slice().to_vec(),
            se: fit.std_errors.iter().copied().collect(),
            free: fit.free.clone(),
            loglik: fit.loglik,
            convergence: ConvergenceRecord {
                status: fit.convergence.status,
                iterations: fit.convergence.iterations,
                gradient_norm: fit.convergence.gradient_norm,
            },
            norms: norms.into(),
        }
    }

    pub fn p(&self) -> usize {
        self.components.len()
    }

    /// Estimated parameters, checked against the declared dimension.
    pub fn params(&self) -> Result<ModelParams> {
        if self.version != RECORD_VERSION {
            bail!("fit report version {} is not supported (expected {RECORD_VERSION})", self.version);
        }
        let p = self.p();
        if self.parameters != theta_labels(p) {
            bail!("fit report parameter names do not match p = {p}");
        }
        Ok(ThetaVector::new(p, self.theta.clone())?.to_params(self.model)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} model, p = {}, n = {}", self.model, self.p(), self.n);
        let _ = writeln!(s, "{:<8} {:>12} {:>12} {:>9}", "param", "estimate", "std.err", "z");
        for (k, name) in self.parameters.iter().enumerate() {
            if self.free[k] {
                let z = self.theta[k] / self.se[k];
                let _ = writeln!(s, "{name:<8} {:>12.5} {:>12.5} {z:>9.2}", self.theta[k], self.se[k]);
            } else {
                let _ = writeln!(s, "{name:<8} {:>12.5} {:>12} {:>9}", self.theta[k], "fixed", "");
            }
        }
        let _ = writeln!(s, "quasi log-likelihood {:.4}", self.loglik);
        let c = &self.convergence;
        let _ =
            writeln!(s, "optimizer {} after {} iterations, gradient {:.2e}", c.status, c.iterations, c.gradient_norm);
        s.push_str(&norms_text(&self.norms));
        s
    }
}

pub fn norms_text(n: &NormsRecord) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<18} {:>10}  verdict", "condition", "value");
    for c in &n.conditions {
        let _ = writeln!(s, "{:<18} {:>10.4}  {}", c.name, c.value, if c.holds { "pass (< 1)" } else { "fail (>= 1)" });
    }
    if !n.series_converged {
        let _ = writeln!(s, "series truncated at j = {} before converging", n.series_truncation_j);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use countflow_core::inference::{fit, FitOptions};
    use countflow_core::simulate::{simulate, SimulationConfig};
    use countflow_core::stationarity::{check_conditions, DEFAULT_SERIES_MAX_J, DEFAULT_SERIES_TOL};
    use countflow_core::{copula::CopulaSpec, presets};

    #[test]
    fn report_round_trips_parameters() {
        let truth = presets::loglinear_diagonal();
        let (y, _) = simulate(&truth, CopulaSpec::independence(), &SimulationConfig::new(300).with_seed(4)).unwrap();
        let f = fit(&y, ModelKind::LogLinear, &FitOptions::default()).unwrap();
        let norms = check_conditions(&f.params, DEFAULT_SERIES_TOL, DEFAULT_SERIES_MAX_J);
        let r = FitReport::new(&f, y.labels_or_default(), &norms);
        let json = serde_json::to_string(&r).unwrap();
        let back: FitReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.params().unwrap(), f.params);
        let text = r.to_text();
        assert!(text.contains("a11") && text.contains("quasi log-likelihood"));
    }

    #[test]
    fn stationarity_text_verdicts() {
        let r = check_conditions(&presets::linear_coupled(), DEFAULT_SERIES_TOL, DEFAULT_SERIES_MAX_J);
        let text = norms_text(&(&r).into());
        assert!(text.contains("0.8944") && text.contains("pass"), "{text}");
        assert!(text.contains("1.0000") && text.contains("fail"), "{text}");
    }
}
