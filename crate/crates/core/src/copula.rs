//! Copula sampling and the copula-Poisson counting construction.
//!
//! A count vector is produced by drawing rows `U_l` from a copula, turning
//! them into exponential waiting times `X_{i,l} = -log(U_{i,l}) / λ_i`, and
//! counting for every component how many arrivals land in `[0, 1]`. Each
//! component is exactly Poisson(λ_i); the copula only couples the waiting
//! times across components.
//!
//! Internally the samplers produce `E_i = -log U_i` directly, which is more
//! accurate than forming `U_i` first when `U_i` is close to one.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::normal;
use crate::{Error, Result};

/// Rows drawn for a single count vector before giving up.
pub const MAX_ROWS_PER_DRAW: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CopulaFamily {
    Independence,
    Gaussian,
    Clayton,
}

impl std::fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CopulaFamily::Independence => "independence",
            CopulaFamily::Gaussian => "gaussian",
            CopulaFamily::Clayton => "clayton",
        })
    }
}

impl std::str::FromStr for CopulaFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "independence" | "independent" => Ok(CopulaFamily::Independence),
            "gaussian" | "normal" => Ok(CopulaFamily::Gaussian),
            "clayton" => Ok(CopulaFamily::Clayton),
            other => Err(Error::InvalidParameter(format!("unknown copula family '{other}'"))),
        }
    }
}

/// One-parameter copula. The Gaussian family uses an exchangeable
/// correlation matrix with off-diagonal `phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec {
    pub family: CopulaFamily,
    #[serde(default)]
    pub phi: f64,
}

impl CopulaSpec {
    pub fn independence() -> Self {
        Self { family: CopulaFamily::Independence, phi: 0.0 }
    }

    pub fn gaussian(phi: f64) -> Self {
        Self { family: CopulaFamily::Gaussian, phi }
    }

    pub fn clayton(phi: f64) -> Self {
        Self { family: CopulaFamily::Clayton, phi }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if p == 0 {
            return Err(Error::Shape("copula dimension must be at least 1".into()));
        }
        match self.family {
            CopulaFamily::Independence => Ok(()),
            CopulaFamily::Gaussian => {
                let lower = if p > 1 { -1.0 / (p as f64 - 1.0) } else { -1.0 };
                if self.phi > lower && self.phi < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "Gaussian copula needs phi in ({lower}, 1) for p = {p}, got {}",
                        self.phi
                    )))
                }
            }
            CopulaFamily::Clayton => {
                if self.phi > 0.0 && self.phi.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("Clayton copula needs phi > 0, got {}", self.phi)))
                }
            }
        }
    }
}

impl std::fmt::Display for CopulaSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.family {
            CopulaFamily::Independence => write!(f, "independence"),
            fam => write!(f, "{fam}(phi = {})", self.phi),
        }
    }
}

/// A validated copula prepared for repeated sampling in dimension `p`.
#[derive(Debug, Clone)]
pub struct CopulaSampler {
    spec: CopulaSpec,
    p: usize,
    /// Lower Cholesky factor of the exchangeable correlation (Gaussian only).
    chol: Option<DMatrix<f64>>,
    /// Frailty law (Clayton only).
    frailty: Option<Gamma<f64>>,
}

impl CopulaSampler {
    pub fn new(spec: CopulaSpec, p: usize) -> Result<Self> {
        spec.validate(p)?;
        let chol = match spec.family {
            CopulaFamily::Gaussian => {
                let corr = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { spec.phi });
                let c = nalgebra::Cholesky::new(corr).ok_or_else(|| {
                    Error::InvalidParameter("exchangeable correlation is not positive definite".into())
                })?;
                Some(c.l())
            }
            _ => None,
        };
        let frailty = match spec.family {
            CopulaFamily::Clayton => Some(
                Gamma::new(1.0 / spec.phi, 1.0)
                    .map_err(|e| Error::InvalidParameter(format!("Clayton frailty: {e}")))?,
            ),
            _ => None,
        };
        Ok(Self { spec, p, chol, frailty })
    }

    pub fn spec(&self) -> CopulaSpec {
        self.spec
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Fills `out` with `-log U_i` for one copula row; marginally Exp(1).
    pub fn sample_neg_log<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.p);
        match self.spec.family {
            CopulaFamily::Independence => {
                for e in out.iter_mut() {
                    *e = Exp1.sample(rng);
                }
            }
            CopulaFamily::Gaussian => {
                let l = self.chol.as_ref().expect("prepared Gaussian factor");
                let mut z = [0.0f64; 16];
                let mut zv;
                let z: &mut [f64] = if self.p <= 16 {
                    &mut z[..self.p]
                } else {
                    zv = vec![0.0; self.p];
                    &mut zv
                };
                for zi in z.iter_mut() {
                    *zi = StandardNormal.sample(rng);
                }
                for i in 0..self.p {
                    let mut s = 0.0;
                    for j in 0..=i {
                        s += l[(i, j)] * z[j];
                    }
                    out[i] = normal::neg_log_cdf(s);
                }
            }
            CopulaFamily::Clayton => {
                // U_i = (1 + V_i / W)^(-1/φ), V_i ~ Exp(1), W ~ Gamma(1/φ, 1)
                let w = self.frailty.as_ref().expect("prepared frailty").sample(rng);
                for e in out.iter_mut() {
                    let v: f64 = Exp1.sample(rng);
                    *e = (v / w).ln_1p() / self.spec.phi;
                }
            }
        }
    }

    /// One copula row with uniform marginals on (0, 1).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut e = vec![0.0; self.p];
        self.sample_neg_log(rng, &mut e);
        e.iter().map(|&v| (-v).exp().clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)).collect()
    }

    /// One copula-Poisson count vector with intensities `lambda`.
    pub fn poisson_draw<R: Rng + ?Sized>(&self, lambda: &[f64], rng: &mut R) -> Result<Vec<u64>> {
        if lambda.len() != self.p {
            return Err(Error::Shape(format!("intensity has length {}, copula dimension is {}", lambda.len(), self.p)));
        }
        if let Some(i) = lambda.iter().position(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::NonPositiveIntensity { t: 0, component: i, value: lambda[i] });
        }
        let mut counts = vec![0u64; self.p];
        let mut elapsed = vec![0.0f64; self.p];
        let mut open = self.p;
        let mut e = vec![0.0; self.p];
        for _ in 0..MAX_ROWS_PER_DRAW {
            self.sample_neg_log(rng, &mut e);
            for i in 0..self.p {
                if elapsed[i] > 1.0 {
                    continue;
                }
                elapsed[i] += e[i] / lambda[i];
                if elapsed[i] <= 1.0 {
                    counts[i] += 1;
                } else {
                    open -= 1;
                }
            }
            if open == 0 {
                return Ok(counts);
            }
        }
        Err(Error::DrawCeiling(MAX_ROWS_PER_DRAW))
    }
}

/// One row from the copula.
pub fn sample_copula<R: Rng + ?Sized>(spec: CopulaSpec, p: usize, rng: &mut R) -> Result<Vec<f64>> {
    Ok(CopulaSampler::new(spec, p)?.sample(rng))
}

/// Copula-Poisson count vector; see the module docs.
pub fn copula_poisson_draw<R: Rng + ?Sized>(lambda: &[f64], spec: CopulaSpec, rng: &mut R) -> Result<Vec<u64>> {
    CopulaSampler::new(spec, lambda.len())?.poisson_draw(lambda, rng)
}

/// Number of arrivals whose cumulative waiting time stays within `[0, 1]`.
pub fn count_arrivals<I: IntoIterator<Item = f64>>(waiting_times: I) -> u64 {
    let mut elapsed = 0.0;
    let mut count = 0;
    for x in waiting_times {
        elapsed += x;
        if elapsed > 1.0 {
            break;
        }
        count += 1;
    }
    count
}
