//! Model-adequacy summaries: correlograms, cumulative periodograms and
//! dispersion ratios.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::{CountSeries, Error, Result};

/// Auto- and cross-correlations at lags `0..=max_lag`.
///
/// Column `i * p + j` of `values` holds `corr(x_{i,t+h}, x_{j,t})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlogram {
    pub p: usize,
    pub lags: Vec<usize>,
    pub values: DMatrix<f64>,
}

impl Correlogram {
    pub fn get(&self, lag: usize, i: usize, j: usize) -> f64 {
        self.values[(lag, i * self.p + j)]
    }
}

/// Biased (divide-by-`n`) sample auto- and cross-correlations of the columns of `x`.
pub fn correlogram(x: &DMatrix<f64>, max_lag: usize) -> Result<Correlogram> {
    let (n, p) = x.shape();
    if n <= max_lag {
        return Err(Error::Precondition(format!("need more than {max_lag} observations, got {n}")));
    }
    let centered: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let col = x.column(j);
            let m = col.mean();
            col.iter().map(|v| v - m).collect()
        })
        .collect();
    let var: Vec<f64> = centered.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / n as f64).collect();
    if let Some(j) = var.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::Degenerate(format!("column {j} has zero variance")));
    }
    let mut values = DMatrix::zeros(max_lag + 1, p * p);
    for h in 0..=max_lag {
        for i in 0..p {
            for j in 0..p {
                let s: f64 = (0..n - h).map(|t| centered[i][t + h] * centered[j][t]).sum();
                let r = s / n as f64 / (var[i] * var[j]).sqrt();
                values[(h, i * p + j)] = if i == j && h == 0 { 1.0 } else { r.clamp(-1.0, 1.0) };
            }
        }
    }
    Ok(Correlogram { p, lags: (0..=max_lag).collect(), values })
}

/// [`correlogram`] of a count series.
pub fn count_correlogram(y: &CountSeries, max_lag: usize) -> Result<Correlogram> {
    correlogram(&y.to_matrix(), max_lag)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BandLevel {
    #[default]
    #[serde(rename = "0.95")]
    P95,
    #[serde(rename = "0.99")]
    P99,
}

impl BandLevel {
    /// Asymptotic Kolmogorov-Smirnov critical value.
    pub fn constant(self) -> f64 {
        match self {
            BandLevel::P95 => 1.358,
            BandLevel::P99 => 1.628,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CumulativePeriodogram {
    /// Fourier frequencies `2πk/n`, `k = 1..=m`.
    pub frequencies: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub band_halfwidth: f64,
    /// `max_j |C_j − j/m|`.
    pub max_deviation: f64,
}

impl CumulativePeriodogram {
    pub fn m(&self) -> usize {
        self.cumulative.len()
    }

    pub fn inside_band(&self) -> bool {
        self.max_deviation <= self.band_halfwidth
    }

    /// Reference diagonal `j/m`.
    pub fn diagonal(&self) -> Vec<f64> {
        let m = self.m() as f64;
        (1..=self.m()).map(|j| j as f64 / m).collect()
    }
}

pub fn cumulative_periodogram(x: &[f64]) -> Result<CumulativePeriodogram> {
    cumulative_periodogram_with(x, BandLevel::P95)
}

/// Normalized cumulative periodogram of the mean-removed series.
pub fn cumulative_periodogram_with(x: &[f64], level: BandLevel) -> Result<CumulativePeriodogram> {
    let n = x.len();
    if n < 8 {
        return Err(Error::Precondition(format!("cumulative periodogram needs n >= 8, got {n}")));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let m = (n - 1) / 2;
    let ordinates: Vec<f64> = buf[1..=m].iter().map(|c| c.norm_sqr() / n as f64).collect();
    let total: f64 = ordinates.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Degenerate("series has no variation around its mean".into()));
    }
    let mut acc = 0.0;
    let mut cumulative: Vec<f64> = ordinates
        .iter()
        .map(|v| {
            acc += v;
            acc / total
        })
        .collect();
    cumulative[m - 1] = 1.0;
    let max_deviation =
        cumulative.iter().enumerate().map(|(j, c)| (c - (j + 1) as f64 / m as f64).abs()).fold(0.0, f64::max);
    Ok(CumulativePeriodogram {
        frequencies: (1..=m).map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64).collect(),
        cumulative,
        band_halfwidth: level.constant() / (m as f64).sqrt(),
        max_deviation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub mean: f64,
    pub variance: f64,
    /// `variance / mean`, zero when the variance is zero.
    pub ratio: f64,
}

/// Sample mean, unbiased variance and their ratio per component.
pub fn overdispersion_summary(y: &CountSeries) -> Result<Vec<Dispersion>> {
    let n = y.n();
    if n < 2 {
        return Err(Error::Precondition(format!("need at least 2 observations, got {n}")));
    }
    Ok((0..y.p())
        .map(|i| {
            let col = y.column(i);
            let mean = col.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
            let variance = col.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let ratio = if variance == 0.0 { 0.0 } else { variance / mean };
            Dispersion { mean, variance, ratio }
        })
        .collect())
}
