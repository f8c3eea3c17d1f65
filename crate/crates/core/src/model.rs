//! Model parameters, data containers and the deterministic intensity recursion.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::stationarity::{operator_norm, NormKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// `λ_t = d + A λ_{t-1} + B Y_{t-1}`
    Linear,
    /// `ν_t = d + A ν_{t-1} + B log(Y_{t-1} + 1)`, `λ_t = exp(ν_t)`
    LogLinear,
}

impl ModelKind {
    /// Scale on which the recursion state lives.
    pub fn scale(self) -> Scale {
        match self {
            ModelKind::Linear => Scale::Mean,
            ModelKind::LogLinear => Scale::LogMean,
        }
    }

    /// The count transform fed back into the recursion.
    #[inline]
    pub fn feedback(self, y: f64) -> f64 {
        match self {
            ModelKind::Linear => y,
            ModelKind::LogLinear => y.ln_1p(),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Linear => "linear",
            ModelKind::LogLinear => "log-linear",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(ModelKind::Linear),
            "log-linear" | "loglinear" | "log_linear" => Ok(ModelKind::LogLinear),
            other => Err(Error::InvalidParameter(format!("unknown model kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Mean,
    LogMean,
}

/// Intercept `d`, feedback matrix `A` and observation matrix `B`.
///
/// Values are immutable once built. [`ModelParams::new`] enforces the sign
/// constraints of the linear model (`d > 0`, `A, B ≥ 0`). Estimates whose
/// off-diagonal entries may legitimately be slightly negative are built with
/// [`ModelParams::new_sign_free`]; for those only the positivity of the
/// intensities actually produced is checked, at the point they are produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    d: DVector<f64>,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    kind: ModelKind,
}

impl ModelParams {
    pub fn new(d: DVector<f64>, a: DMatrix<f64>, b: DMatrix<f64>, kind: ModelKind) -> Result<Self> {
        let params = Self::new_sign_free(d, a, b, kind)?;
        if kind == ModelKind::Linear {
            if let Some(i) = params.d.iter().position(|&v| !(v > 0.0)) {
                return Err(Error::InvalidParameter(format!("linear model needs d > 0, got d[{i}] = {}", params.d[i])));
            }
            for (name, m) in [("A", &params.a), ("B", &params.b)] {
                if let Some(v) = m.iter().find(|&&v| v < 0.0) {
                    return Err(Error::InvalidParameter(format!("linear model needs nonnegative {name}, found {v}")));
                }
            }
        }
        Ok(params)
    }

    /// Shape and finiteness checks only.
    pub fn new_sign_free(d: DVector<f64>, a: DMatrix<f64>, b: DMatrix<f64>, kind: ModelKind) -> Result<Self> {
        let p = d.len();
        if p == 0 {
            return Err(Error::Shape("dimension p must be at least 1".into()));
        }
        if a.shape() != (p, p) || b.shape() != (p, p) {
            return Err(Error::Shape(format!("d has length {p} but A is {:?} and B is {:?}", a.shape(), b.shape())));
        }
        if d.iter().chain(a.iter()).chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("parameters must be finite".into()));
        }
        Ok(Self { d, a, b, kind })
    }

    /// Convenience constructor from row-major nested slices.
    pub fn from_rows(d: &[f64], a: &[&[f64]], b: &[&[f64]], kind: ModelKind) -> Result<Self> {
        let p = d.len();
        let rows = |m: &[&[f64]], name: &str| -> Result<DMatrix<f64>> {
            if m.len() != p || m.iter().any(|r| r.len() != p) {
                return Err(Error::Shape(format!("{name} must be {p}x{p}")));
            }
            Ok(DMatrix::from_fn(p, p, |i, j| m[i][j]))
        };
        Self::new(DVector::from_column_slice(d), rows(a, "A")?, rows(b, "B")?, kind)
    }

    pub fn p(&self) -> usize {
        self.d.len()
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn d(&self) -> &DVector<f64> {
        &self.d
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// Whether the linear sign constraints hold (always true for log-linear).
    pub fn respects_signs(&self) -> bool {
        self.kind == ModelKind::LogLinear
            || (self.d.iter().all(|&v| v > 0.0) && self.a.iter().chain(self.b.iter()).all(|&v| v >= 0.0))
    }

    /// One step of the recursion with an already transformed feedback input
    /// (`y` for linear, `log(y + 1)` for log-linear). Writes into `out`.
    #[inline]
    pub(crate) fn step_into(&self, state: &[f64], input: &[f64], out: &mut [f64]) {
        let p = self.p();
        for i in 0..p {
            let mut s = self.d[i];
            for j in 0..p {
                s += self.a[(i, j)] * state[j] + self.b[(i, j)] * input[j];
            }
            out[i] = s;
        }
    }
}

/// `n × p` matrix of nonnegative counts, stored row-major (one row per time point).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountSeries {
    p: usize,
    values: Vec<u64>,
    labels: Option<Vec<String>>,
}

impl CountSeries {
    pub fn new(p: usize, values: Vec<u64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::Shape("count series needs at least one column".into()));
        }
        if !values.len().is_multiple_of(p) {
            return Err(Error::Shape(format!("{} values do not fill rows of width {p}", values.len())));
        }
        Ok(Self { p, values, labels: None })
    }

    pub fn empty(p: usize) -> Result<Self> {
        Self::new(p, Vec::new())
    }

    pub fn from_rows<R: AsRef<[u64]>>(rows: &[R]) -> Result<Self> {
        let p = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if let Some(t) = rows.iter().position(|r| r.as_ref().len() != p) {
            return Err(Error::Shape(format!("row {t} has a different width than row 0")));
        }
        Self::new(p, rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect())
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.p {
            return Err(Error::Shape(format!("{} labels for {} columns", labels.len(), self.p)));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.p
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Labels, falling back to `y1, y2, ...`.
    pub fn labels_or_default(&self) -> Vec<String> {
        self.labels.clone().unwrap_or_else(|| (1..=self.p).map(|i| format!("y{i}")).collect())
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[u64] {
        &self.values[t * self.p..(t + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.values.chunks_exact(self.p)
    }

    pub fn column(&self, i: usize) -> Vec<u64> {
        self.rows().map(|r| r[i]).collect()
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.values
    }

    pub fn column_means(&self) -> Vec<f64> {
        let n = self.n();
        let mut m = vec![0.0; self.p];
        for r in self.rows() {
            for (acc, &v) in m.iter_mut().zip(r) {
                *acc += v as f64;
            }
        }
        if n > 0 {
            m.iter_mut().for_each(|v| *v /= n as f64);
        }
        m
    }

    pub fn max_value(&self) -> u64 {
        self.values.iter().copied().max().unwrap_or(0)
    }

    /// New series whose column `k` is column `perm[k]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.p {
            return Err(Error::Shape("permutation length differs from p".into()));
        }
        let values = self.rows().flat_map(|r| perm.iter().map(move |&k| r[k])).collect();
        let labels = self.labels.as_ref().map(|l| perm.iter().map(|&k| l[k].clone()).collect());
        Ok(Self { p: self.p, values, labels })
    }

    /// Real-valued `n × p` copy.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.p, |t, i| self.values[t * self.p + i] as f64)
    }
}

/// `n × p` path of conditional means (`Scale::Mean`) or log-means (`Scale::LogMean`).
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityPath {
    p: usize,
    values: Vec<f64>,
    scale: Scale,
}

impl IntensityPath {
    pub fn new(p: usize, values: Vec<f64>, scale: Scale) -> Result<Self> {
        if p == 0 || !values.len().is_multiple_of(p) {
            return Err(Error::Shape("intensity values do not fill whole rows".into()));
        }
        if scale == Scale::Mean {
            if let Some(k) = values.iter().position(|&v| !(v > 0.0)) {
                return Err(Error::NonPositiveIntensity { t: k / p, component: k % p, value: values[k] });
            }
        }
        Ok(Self { p, values, scale })
    }

    pub fn empty(p: usize, scale: Scale) -> Self {
        Self { p, values: Vec::new(), scale }
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.p
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.p..(t + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.p)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Conditional mean `λ_{t,i}` regardless of the stored scale.
    #[inline]
    pub fn mean(&self, t: usize, i: usize) -> f64 {
        let v = self.values[t * self.p + i];
        match self.scale {
            Scale::Mean => v,
            Scale::LogMean => v.exp(),
        }
    }

    /// Path converted to the mean scale.
    pub fn to_means(&self) -> IntensityPath {
        match self.scale {
            Scale::Mean => self.clone(),
            Scale::LogMean => {
                IntensityPath { p: self.p, values: self.values.iter().map(|v| v.exp()).collect(), scale: Scale::Mean }
            }
        }
    }
}

fn check_len(what: &str, got: usize, p: usize) -> Result<()> {
    if got != p {
        return Err(Error::Shape(format!("{what} has length {got}, expected {p}")));
    }
    Ok(())
}

/// One application of the intensity recursion.
///
/// `state_prev` is `λ_{t-1}` (linear) or `ν_{t-1}` (log-linear).
pub fn mean_update(params: &ModelParams, state_prev: &[f64], y_prev: &[u64]) -> Result<Vec<f64>> {
    let p = params.p();
    check_len("state", state_prev.len(), p)?;
    check_len("count vector", y_prev.len(), p)?;
    if params.kind() == ModelKind::Linear {
        if let Some(i) = state_prev.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::NonPositiveIntensity { t: 0, component: i, value: state_prev[i] });
        }
    }
    let input: Vec<f64> = y_prev.iter().map(|&y| params.kind().feedback(y as f64)).collect();
    let mut out = vec![0.0; p];
    params.step_into(state_prev, &input, &mut out);
    if params.kind() == ModelKind::Linear {
        if let Some(i) = out.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::NonPositiveIntensity { t: 1, component: i, value: out[i] });
        }
    }
    Ok(out)
}

/// Fixed point of the skeleton recursion, `(I - A)^{-1} d`.
pub fn fixed_point(params: &ModelParams) -> Result<Vec<f64>> {
    let rho = linalg::spectral_radius(params.a());
    if !(rho < 1.0) {
        return Err(Error::Precondition(format!("spectral radius of A is {rho}, need < 1")));
    }
    let p = params.p();
    let m = DMatrix::identity(p, p) - params.a();
    Ok(linalg::solve(&m, params.d())?.as_slice().to_vec())
}

/// Stationary mean of the linear model, `(I - A - B)^{-1} d`.
pub fn unconditional_mean_linear(params: &ModelParams) -> Result<Vec<f64>> {
    if params.kind() != ModelKind::Linear {
        return Err(Error::Precondition("unconditional mean formula is for the linear model".into()));
    }
    let ab = params.a() + params.b();
    let norm = operator_norm(&ab, NormKind::Two);
    if !(norm < 1.0) {
        return Err(Error::Precondition(format!("|||A+B|||_2 = {norm}, need < 1")));
    }
    let p = params.p();
    let m = DMatrix::identity(p, p) - ab;
    Ok(linalg::solve(&m, params.d())?.as_slice().to_vec())
}

/// `(I - A)^{-1} d + Σ_{j<K} A^j B y_{t-j-1}`.
///
/// Row `j` of `history` is `y_{t-j-1}` (most recent first); only the first `k`
/// rows are used.
pub fn truncated_infinite_representation(params: &ModelParams, history: &CountSeries, k: usize) -> Result<Vec<f64>> {
    if params.kind() != ModelKind::Linear {
        return Err(Error::Precondition("infinite representation is for the linear model".into()));
    }
    let norm_a = operator_norm(params.a(), NormKind::Two);
    if !(norm_a < 1.0) {
        return Err(Error::Precondition(format!("|||A|||_2 = {norm_a}, need < 1")));
    }
    if k > 0 {
        check_len("history row", history.p(), params.p())?;
    }
    if history.n() < k {
        return Err(Error::Precondition(format!("history has {} rows, K = {k} requested", history.n())));
    }
    let p = params.p();
    let mut acc = linalg::solve(&(DMatrix::identity(p, p) - params.a()), params.d())?;
    // a_pow_b = A^j B
    let mut a_pow_b = params.b().clone();
    for j in 0..k {
        let y = DVector::from_iterator(p, history.row(j).iter().map(|&v| v as f64));
        acc += &a_pow_b * y;
        a_pow_b = params.a() * a_pow_b;
    }
    Ok(acc.as_slice().to_vec())
}
