//! Local Gaussian fits by local likelihood.
//!
//! At a point `x` the bivariate Gaussian `ψ(·; γ)` with
//! `γ = (μ₁, μ₂, σ₁, σ₂, ρ)` maximizes
//!
//! `n⁻¹ Σ_i K_b(X_i − x) log ψ(X_i; γ) − ∫ K_b(v − x) ψ(v; γ) dv`
//!
//! with `K_b` a product Gaussian kernel. The integral is the Gaussian density
//! at `x` with covariance `Σ(γ) + diag(b²)`, and the first term only needs the
//! kernel-weighted zeroth, first and second moments of the data, so each
//! objective evaluation is O(1) once the moments are in hand.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MIN_SAMPLE: usize = 30;
const NM_TOL: f64 = 1e-6;
const NM_MAX_EVALS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalParams {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
}

impl LocalParams {
    fn to_free(self) -> [f64; 5] {
        [self.mu1, self.mu2, self.sigma1.ln(), self.sigma2.ln(), self.rho.clamp(-0.999, 0.999).atanh()]
    }

    fn from_free(u: &[f64; 5]) -> Self {
        Self { mu1: u[0], mu2: u[1], sigma1: u[2].exp(), sigma2: u[3].exp(), rho: u[4].tanh() }
    }

    /// Sample means, divide-by-`n` standard deviations and correlation.
    pub fn global_moments(data: &DMatrix<f64>) -> Result<Self> {
        let n = data.nrows() as f64;
        let (m1, m2) = (data.column(0).mean(), data.column(1).mean());
        let (mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0);
        for r in data.row_iter() {
            let (a, b) = (r[0] - m1, r[1] - m2);
            s11 += a * a;
            s22 += b * b;
            s12 += a * b;
        }
        if !(s11 > 0.0) || !(s22 > 0.0) {
            return Err(Error::Degenerate("a coordinate has zero variance".into()));
        }
        Ok(Self { mu1: m1, mu2: m2, sigma1: (s11 / n).sqrt(), sigma2: (s22 / n).sqrt(), rho: s12 / (s11 * s22).sqrt() })
    }
}

/// Kernel-weighted moments of the data around one point, kernel scaled so
/// that `K_b(0) = 1`.
#[derive(Debug, Clone, Copy)]
struct WeightedMoments {
    w: f64,
    m: [f64; 2],
    s: [f64; 3], // Σ w x₁², Σ w x₂², Σ w x₁x₂
    n: f64,
}

impl WeightedMoments {
    fn at(data: &DMatrix<f64>, x: [f64; 2], b: [f64; 2]) -> Self {
        let mut out = Self { w: 0.0, m: [0.0; 2], s: [0.0; 3], n: data.nrows() as f64 };
        for r in data.row_iter() {
            let (u, v) = ((r[0] - x[0]) / b[0], (r[1] - x[1]) / b[1]);
            let w = (-0.5 * (u * u + v * v)).exp();
            out.w += w;
            out.m[0] += w * r[0];
            out.m[1] += w * r[1];
            out.s[0] += w * r[0] * r[0];
            out.s[1] += w * r[1] * r[1];
            out.s[2] += w * r[0] * r[1];
        }
        out
    }

    fn local_variances(&self) -> [f64; 2] {
        let v1 = self.s[0] / self.w - (self.m[0] / self.w).powi(2);
        let v2 = self.s[1] / self.w - (self.m[1] / self.w).powi(2);
        [v1, v2]
    }
}

/// `log N(z; 0, [[a, c], [c, e]])` for the 2×2 covariance.
fn log_bvn_at(z: [f64; 2], a: f64, e: f64, c: f64) -> f64 {
    let det = a * e - c * c;
    let q = (e * z[0] * z[0] - 2.0 * c * z[0] * z[1] + a * z[1] * z[1]) / det;
    -(2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * q
}

/// Local likelihood objective, multiplied by `2π b₁ b₂` (kernel peak of one).
fn objective(g: &LocalParams, mom: &WeightedMoments, x: [f64; 2], b: [f64; 2]) -> f64 {
    let (s1, s2, r) = (g.sigma1, g.sigma2, g.rho);
    let (a, e, c) = (s1 * s1, s2 * s2, r * s1 * s2);
    let det = a * e - c * c;
    if !(det > 0.0) || !det.is_finite() {
        return f64::NEG_INFINITY;
    }
    // Σ w (X − μ)(X − μ)ᵀ from the raw moments
    let mu = [g.mu1, g.mu2];
    let s11 = mom.s[0] - 2.0 * mu[0] * mom.m[0] + mom.w * mu[0] * mu[0];
    let s22 = mom.s[1] - 2.0 * mu[1] * mom.m[1] + mom.w * mu[1] * mu[1];
    let s12 = mom.s[2] - mu[0] * mom.m[1] - mu[1] * mom.m[0] + mom.w * mu[0] * mu[1];
    let trace = (e * s11 - 2.0 * c * s12 + a * s22) / det;
    let loglik = mom.w * (-(2.0 * PI).ln() - 0.5 * det.ln()) - 0.5 * trace;
    let conv = log_bvn_at([x[0] - mu[0], x[1] - mu[1]], a + b[0] * b[0], e + b[1] * b[1], c).exp();
    loglik / mom.n - 2.0 * PI * b[0] * b[1] * conv
}

/// Nelder–Mead maximization; returns the best vertex and whether the
/// tolerance was met before the evaluation budget ran out.
fn nelder_mead<F: Fn(&[f64; 5]) -> f64>(f: F, x0: [f64; 5], step: f64) -> ([f64; 5], bool) {
    let neg = |x: &[f64; 5]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            -v
        }
    };
    let mut simplex: Vec<([f64; 5], f64)> = Vec::with_capacity(6);
    simplex.push((x0, neg(&x0)));
    for k in 0..5 {
        let mut x = x0;
        x[k] += step;
        simplex.push((x, neg(&x)));
    }
    let mut evals = 6;
    let centroid = |s: &[([f64; 5], f64)]| {
        let mut c = [0.0; 5];
        for (x, _) in &s[..5] {
            for k in 0..5 {
                c[k] += x[k] / 5.0;
            }
        }
        c
    };
    let lerp = |c: &[f64; 5], w: &[f64; 5], t: f64| {
        let mut out = [0.0; 5];
        for k in 0..5 {
            out[k] = c[k] + t * (w[k] - c[k]);
        }
        out
    };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0];
        let spread = simplex[5].1 - best.1;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&best.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size <= NM_TOL && spread <= NM_TOL * (best.1.abs() + NM_TOL) {
            return (best.0, true);
        }
        if evals >= NM_MAX_EVALS {
            return (best.0, false);
        }
        let c = centroid(&simplex);
        let worst = simplex[5];
        let xr = lerp(&c, &worst.0, -1.0);
        let fr = neg(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = lerp(&c, &worst.0, -2.0);
            let fe = neg(&xe);
            evals += 1;
            simplex[5] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[4].1 {
            simplex[5] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = lerp(&c, &worst.0, -0.5);
                (x, neg(&x))
            } else {
                let x = lerp(&c, &worst.0, 0.5);
                (x, neg(&x))
            };
            evals += 1;
            if fc < worst.1.min(fr) {
                simplex[5] = (xc, fc);
            } else {
                let b = simplex[0].0;
                for v in simplex.iter_mut().skip(1) {
                    v.0 = lerp(&b, &v.0, 0.5);
                    v.1 = neg(&v.0);
                }
                evals += 5;
            }
        }
    }
}

fn check_inputs(data: &DMatrix<f64>, b: [f64; 2]) -> Result<()> {
    if data.ncols() != 2 {
        return Err(Error::Shape(format!("local Gaussian fits need 2 columns, got {}", data.ncols())));
    }
    if data.nrows() < MIN_SAMPLE {
        return Err(Error::Precondition(format!("need at least {MIN_SAMPLE} observations, got {}", data.nrows())));
    }
    if !(b[0] > 0.0 && b[1] > 0.0) {
        return Err(Error::InvalidParameter(format!("bandwidths must be positive, got {b:?}")));
    }
    Ok(())
}

/// Fit plus a flag telling whether the simplex met its tolerance.
pub(crate) fn fit_at(data: &DMatrix<f64>, x: [f64; 2], b: [f64; 2], start: LocalParams) -> Result<(LocalParams, bool)> {
    let mom = WeightedMoments::at(data, x, b);
    let v = mom.local_variances();
    let centre = [mom.m[0] / mom.w, mom.m[1] / mom.w];
    if !(mom.w > 0.0) || (0..2).any(|k| !(v[k] > 1e-10 * (1.0 + centre[k] * centre[k]))) {
        return Err(Error::Degenerate(format!("no local variation around ({}, {})", x[0], x[1])));
    }
    let f = |u: &[f64; 5]| objective(&LocalParams::from_free(u), &mom, x, b);
    let (u, ok) = nelder_mead(f, start.to_free(), 0.1);
    Ok((LocalParams::from_free(&u), ok))
}

/// Local Gaussian parameters at `x` with bandwidths `b`, started from the
/// global moments of the data.
pub fn local_gaussian_fit(data: &DMatrix<f64>, x: [f64; 2], b: [f64; 2]) -> Result<LocalParams> {
    check_inputs(data, b)?;
    let start = LocalParams::global_moments(data)?;
    let (g, ok) = fit_at(data, x, b, start)?;
    if !ok {
        return Err(Error::NoConvergence(format!("local fit at ({}, {}) did not converge", x[0], x[1])));
    }
    Ok(g)
}

pub(crate) fn validate(data: &DMatrix<f64>, b: [f64; 2]) -> Result<LocalParams> {
    check_inputs(data, b)?;
    LocalParams::global_moments(data)
}
