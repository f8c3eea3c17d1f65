use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::likelihood::{evaluate, information_from, observed_hessian, quasi_loglik};
use super::optimize::{maximize, BfgsOptions, Convergence};
use super::theta::{index_a, index_b, theta_dim, ThetaVector};
use crate::model::mean_update;
use crate::{linalg, CountSeries, Error, IntensityPath, ModelKind, ModelParams, Result};

/// How the linear model's positivity requirement is enforced during the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Positivity {
    /// θ is unconstrained; points producing a nonpositive intensity anywhere
    /// on the filtered path are rejected by the line search.
    #[default]
    Intensity,
    /// Every free entry is optimized as `exp(u)`, so it stays strictly positive.
    LogTransform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HessianForm {
    /// `Σ J_tᵀ W_t J_t`, positive definite by construction.
    #[default]
    Expected,
    /// Exact negative second derivative of the quasi log-likelihood.
    Observed,
}

impl std::str::FromStr for Positivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "intensity" => Ok(Positivity::Intensity),
            "log-transform" | "log" => Ok(Positivity::LogTransform),
            other => Err(Error::InvalidParameter(format!("unknown positivity handling '{other}'"))),
        }
    }
}

impl std::str::FromStr for HessianForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "expected" => Ok(HessianForm::Expected),
            "observed" => Ok(HessianForm::Observed),
            other => Err(Error::InvalidParameter(format!("unknown Hessian form '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitOptions {
    pub positivity: Positivity,
    pub hessian: HessianForm,
    /// `true` marks a free entry of θ; `false` pins it at zero. `None` frees all.
    pub mask: Option<Vec<bool>>,
    pub start: Option<ThetaVector>,
    pub bfgs: BfgsOptions,
}

impl FitOptions {
    pub fn diagonal(p: usize) -> Self {
        Self { mask: Some(diagonal_mask(p)), ..Self::default() }
    }
}

/// Mask freeing `d` and the diagonals of `A` and `B`.
pub fn diagonal_mask(p: usize) -> Vec<bool> {
    let mut m = vec![false; theta_dim(p)];
    for i in 0..p {
        m[i] = true;
        m[index_a(p, i, i)] = true;
        m[index_b(p, i, i)] = true;
    }
    m
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub kind: ModelKind,
    pub theta_hat: ThetaVector,
    pub params: ModelParams,
    pub loglik: f64,
    pub h_n: DMatrix<f64>,
    pub g_n: DMatrix<f64>,
    /// `H⁻¹ G H⁻¹` on the free entries, zero rows and columns for pinned ones.
    pub sandwich: DMatrix<f64>,
    pub std_errors: DVector<f64>,
    pub fitted_intensity: IntensityPath,
    pub convergence: Convergence,
    pub free: Vec<bool>,
    pub n: usize,
}

/// Sandwich `H⁻¹ G H⁻¹` restricted to the `free` entries.
pub fn sandwich(h: &DMatrix<f64>, g: &DMatrix<f64>, free: &[bool]) -> Result<DMatrix<f64>> {
    let idx: Vec<usize> = (0..free.len()).filter(|&k| free[k]).collect();
    let m = idx.len();
    let hf = DMatrix::from_fn(m, m, |r, c| h[(idx[r], idx[c])]);
    let gf = DMatrix::from_fn(m, m, |r, c| g[(idx[r], idx[c])]);
    let hinv = linalg::inverse(&hf)?;
    let sf = &hinv * gf * &hinv;
    let mut out = DMatrix::zeros(free.len(), free.len());
    for r in 0..m {
        for c in 0..m {
            out[(idx[r], idx[c])] = 0.5 * (sf[(r, c)] + sf[(c, r)]);
        }
    }
    Ok(out)
}

/// Least squares of `z_t` on `(1, z_{t-1})`; returns (intercepts, slope matrix).
fn lag_regression(z: &DMatrix<f64>) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let (n, p) = z.shape();
    if n < p + 3 {
        return None;
    }
    let mut xtx = DMatrix::zeros(p + 1, p + 1);
    let mut xtz = DMatrix::zeros(p + 1, p);
    let mut x = vec![0.0; p + 1];
    for t in 1..n {
        x[0] = 1.0;
        for j in 0..p {
            x[j + 1] = z[(t - 1, j)];
        }
        for r in 0..=p {
            for c in 0..=p {
                xtx[(r, c)] += x[r] * x[c];
            }
            for c in 0..p {
                xtz[(r, c)] += x[r] * z[(t, c)];
            }
        }
    }
    let beta = linalg::solve_many(&xtx, &xtz).ok()?;
    let c = DVector::from_fn(p, |i, _| beta[(0, i)]);
    let slopes = DMatrix::from_fn(p, p, |i, j| beta[(j + 1, i)]);
    Some((c, slopes))
}

fn apply_mask(v: &mut [f64], mask: &[bool]) {
    for (x, &free) in v.iter_mut().zip(mask) {
        if !free {
            *x = 0.0;
        }
    }
}

fn assemble(p: usize, d: &DVector<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let mut v = Vec::with_capacity(theta_dim(p));
    v.extend_from_slice(d.as_slice());
    v.extend_from_slice(a.as_slice());
    v.extend_from_slice(b.as_slice());
    v
}

fn linear_start(y: &CountSeries, mask: &[bool], positivity: Positivity) -> Result<ThetaVector> {
    let p = y.p();
    let ybar = DVector::from_vec(y.column_means());
    let floor = match positivity {
        Positivity::Intensity => 0.0,
        Positivity::LogTransform => 0.01,
    };
    let mut a = DMatrix::from_fn(p, p, |i, j| if i == j { 0.1 } else { floor });
    let (_, mut b) = lag_regression(&y.to_matrix()).unwrap_or((ybar.clone(), DMatrix::identity(p, p) * 0.1));
    b.iter_mut().for_each(|v| *v = v.max(floor));
    let mut v = assemble(p, &DVector::zeros(p), &a, &b);
    apply_mask(&mut v, mask);
    a = DMatrix::from_column_slice(p, p, &v[p..p + p * p]);
    b = DMatrix::from_column_slice(p, p, &v[p + p * p..]);
    let rho = linalg::spectral_radius(&(&a + &b));
    if rho > 0.9 {
        b *= 0.8 / linalg::spectral_radius(&b).max(1e-12);
    }
    // keep the implied stationary mean at ȳ
    let mut d = (DMatrix::identity(p, p) - &a - &b) * &ybar;
    for i in 0..p {
        if !(d[i] > 0.05 * ybar[i]) || d[i] <= 0.0 {
            d[i] = (0.1 * ybar[i]).max(0.1);
        }
    }
    let mut v = assemble(p, &d, &a, &b);
    apply_mask(&mut v, mask);
    let theta = ThetaVector::new(p, v)?;
    if quasi_loglik(&theta.to_params(ModelKind::Linear)?, y).is_ok() {
        return Ok(theta);
    }
    let d = ybar.map(|m| 0.8 * m + 0.1);
    let a = DMatrix::from_fn(p, p, |i, j| if i == j { 0.1 } else { floor });
    let mut v = assemble(p, &d, &a, &a);
    apply_mask(&mut v, mask);
    ThetaVector::new(p, v)
}

fn loglinear_start(y: &CountSeries, mask: &[bool], bfgs: &BfgsOptions) -> Result<ThetaVector> {
    let p = y.p();
    let ybar = y.column_means();
    let x = y.to_matrix().map(|v| v.ln_1p());
    let mux: Vec<f64> = (0..p).map(|j| x.column(j).mean()).collect();
    let mut d = DVector::zeros(p);
    let mut a = DMatrix::zeros(p, p);
    let mut b = DMatrix::zeros(p, p);
    for i in 0..p {
        let col = CountSeries::new(1, y.column(i))?;
        let xi = x.columns(i, 1).clone_owned();
        let b0 = lag_regression(&xi).map(|(_, s)| s[(0, 0)]).unwrap_or(0.1).clamp(-0.9, 0.9);
        let a0 = 0.1;
        let d0 = (1.0 - a0) * ybar[i].max(0.1).ln() - b0 * mux[i];
        let uni_mask = [true, mask[index_a(p, i, i)], mask[index_b(p, i, i)]];
        let mut start = vec![d0, a0, b0];
        apply_mask(&mut start, &uni_mask);
        let start = ThetaVector::new(1, start)?;
        let est = optimize_theta(&col, ModelKind::LogLinear, &uni_mask, Positivity::Intensity, &start, bfgs)
            .map(|(t, _)| t)
            .unwrap_or(start);
        let e = est.as_slice();
        if e.iter().all(|v| v.is_finite()) && e[1].abs() < 1.0 {
            d[i] = e[0];
            a[(i, i)] = e[1];
            b[(i, i)] = e[2];
        } else {
            d[i] = d0;
            a[(i, i)] = a0;
            b[(i, i)] = b0;
        }
    }
    if let Some((_, slopes)) = lag_regression(&x) {
        for i in 0..p {
            for j in 0..p {
                if i != j && mask[index_b(p, i, j)] {
                    b[(i, j)] = slopes[(i, j)].clamp(-0.5, 0.5);
                    d[i] -= b[(i, j)] * mux[j];
                }
            }
        }
    }
    let mut v = assemble(p, &d, &a, &b);
    apply_mask(&mut v, mask);
    ThetaVector::new(p, v)
}

/// Starting values used by [`fit`] when none are supplied.
///
/// Linear: lag-one least squares gives `B`, `A = 0.1 I`, and `d` is set so the
/// implied stationary mean equals the sample mean. Log-linear: one univariate
/// fit per component fills the diagonals, a lag-one regression of
/// `log(y + 1)` supplies the off-diagonal entries of `B`.
pub fn starting_values(y: &CountSeries, kind: ModelKind, options: &FitOptions) -> Result<ThetaVector> {
    let mask = resolve_mask(y.p(), options)?;
    match kind {
        ModelKind::Linear => linear_start(y, &mask, options.positivity),
        ModelKind::LogLinear => loglinear_start(y, &mask, &options.bfgs),
    }
}

fn resolve_mask(p: usize, options: &FitOptions) -> Result<Vec<bool>> {
    match &options.mask {
        Some(m) if m.len() != theta_dim(p) => {
            Err(Error::Shape(format!("mask has length {}, expected {}", m.len(), theta_dim(p))))
        }
        Some(m) => Ok(m.clone()),
        None => Ok(vec![true; theta_dim(p)]),
    }
}

/// Runs the ascent from `start` over the free coordinates.
fn optimize_theta(
    y: &CountSeries,
    kind: ModelKind,
    mask: &[bool],
    positivity: Positivity,
    start: &ThetaVector,
    bfgs: &BfgsOptions,
) -> Result<(ThetaVector, Convergence)> {
    let p = y.p();
    let idx: Vec<usize> = (0..mask.len()).filter(|&k| mask[k]).collect();
    let log_coords = kind == ModelKind::Linear && positivity == Positivity::LogTransform;
    let scale = 1.0 / y.n() as f64;
    let base = start.as_slice().to_vec();

    let to_theta = |u: &DVector<f64>| -> Vec<f64> {
        let mut v = base.clone();
        for (r, &k) in idx.iter().enumerate() {
            v[k] = if log_coords { u[r].exp() } else { u[r] };
        }
        v
    };
    let objective = |u: &DVector<f64>| -> Option<(f64, DVector<f64>)> {
        let v = to_theta(u);
        let params = ThetaVector::new(p, v.clone()).ok()?.to_params(kind).ok()?;
        let eval = evaluate(&params, y).ok()?;
        let grad = DVector::from_fn(idx.len(), |r, _| {
            let k = idx[r];
            let g = eval.score[k] * scale;
            if log_coords {
                g * v[k]
            } else {
                g
            }
        });
        if !grad.iter().all(|g| g.is_finite()) {
            return None;
        }
        Some((eval.loglik * scale, grad))
    };

    let u0 = DVector::from_fn(idx.len(), |r, _| {
        let v = base[idx[r]];
        if log_coords {
            v.max(1e-8).ln()
        } else {
            v
        }
    });
    let m = maximize(objective, u0, bfgs)
        .ok_or_else(|| Error::Precondition("quasi log-likelihood undefined at the starting values".into()))?;
    let theta = ThetaVector::new(p, to_theta(&m.x))?;
    let mut conv = m.convergence;
    conv.trace.iter_mut().for_each(|v| *v /= scale);
    Ok((theta, conv))
}

/// Quasi-maximum likelihood fit with sandwich standard errors.
///
/// A run that stops without meeting the gradient tolerance still returns its
/// last iterate; inspect `convergence.status`.
pub fn fit(y: &CountSeries, kind: ModelKind, options: &FitOptions) -> Result<FitResult> {
    let p = y.p();
    let dim = theta_dim(p);
    if y.n() <= dim {
        return Err(Error::Precondition(format!(
            "need more than {dim} observations to fit {dim} parameters, got {}",
            y.n()
        )));
    }
    let mask = resolve_mask(p, options)?;
    let start = match &options.start {
        Some(s) if s.p() != p => return Err(Error::Shape("starting θ has the wrong dimension".into())),
        Some(s) => {
            let mut v = s.as_slice().to_vec();
            apply_mask(&mut v, &mask);
            ThetaVector::new(p, v)?
        }
        None => starting_values(y, kind, options)?,
    };
    let (theta_hat, convergence) = optimize_theta(y, kind, &mask, options.positivity, &start, &options.bfgs)?;
    if !convergence.status.is_success() {
        log::warn!(
            "fit stopped with status {} after {} iterations (gradient {:.3e})",
            convergence.status,
            convergence.iterations,
            convergence.gradient_norm
        );
    }
    let params = theta_hat.to_params(kind)?;
    let eval = evaluate(&params, y)?;
    let (h_expected, g_n) = information_from(&params, y, &eval);
    let h_n = match options.hessian {
        HessianForm::Expected => h_expected,
        HessianForm::Observed => observed_hessian(&params, y)?,
    };
    let sandwich = sandwich(&h_n, &g_n, &mask)?;
    let std_errors = sandwich.diagonal().map(|v| v.max(0.0).sqrt());
    Ok(FitResult {
        kind,
        theta_hat,
        params,
        loglik: eval.loglik,
        h_n,
        g_n,
        sandwich,
        std_errors,
        fitted_intensity: eval.path,
        convergence,
        free: mask,
        n: y.n(),
    })
}

/// `(Y − λ̂)/√λ̂`, one row per time point.
pub fn pearson_residuals(fit: &FitResult, y: &CountSeries) -> Result<DMatrix<f64>> {
    let path = &fit.fitted_intensity;
    if path.n() != y.n() || path.p() != y.p() {
        return Err(Error::Shape("series does not match the fitted intensity".into()));
    }
    Ok(DMatrix::from_fn(y.n(), y.p(), |t, i| {
        let lam = path.mean(t, i);
        (y.row(t)[i] as f64 - lam) / lam.sqrt()
    }))
}

/// `λ̂_{n+1}` on the mean scale from the last fitted state and `y_last`.
pub fn predict_one_step(fit: &FitResult, y_last: &[u64]) -> Result<Vec<f64>> {
    let n = fit.fitted_intensity.n();
    if n == 0 {
        return Err(Error::Empty("fit has no fitted intensities".into()));
    }
    let next = mean_update(&fit.params, fit.fitted_intensity.row(n - 1), y_last)?;
    Ok(match fit.kind {
        ModelKind::Linear => next,
        ModelKind::LogLinear => next.into_iter().map(f64::exp).collect(),
    })
}
