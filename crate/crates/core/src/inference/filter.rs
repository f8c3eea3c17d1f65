use nalgebra::DMatrixView;

use super::theta::{index_a, index_b, theta_dim};
use crate::{CountSeries, Error, IntensityPath, ModelKind, ModelParams, Result};

/// Pre-sample state and input used to start the filter.
///
/// Both are built from the column means `ȳ` of the data: `λ_0 = Y_0 = ȳ` for
/// the linear model and `ν_0 = log(ȳ + 1)`, `log(Y_0 + 1) = log(ȳ + 1)` for the
/// log-linear model. They do not depend on θ, so `∂state_0/∂θ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Presample {
    pub state: Vec<f64>,
    pub input: Vec<f64>,
}

impl Presample {
    pub fn from_data(kind: ModelKind, y: &CountSeries) -> Self {
        let v: Vec<f64> = y.column_means().into_iter().map(|m| kind.feedback(m)).collect();
        Self { state: v.clone(), input: v }
    }
}

/// `∂state_t/∂θᵀ` for every `t`, each a `p × dim θ` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPath {
    p: usize,
    dim: usize,
    values: Vec<f64>,
}

impl GradientPath {
    pub fn n(&self) -> usize {
        self.values.len() / (self.p * self.dim)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Column-major slice of the Jacobian at time `t`.
    #[inline]
    pub fn raw(&self, t: usize) -> &[f64] {
        let w = self.p * self.dim;
        &self.values[t * w..(t + 1) * w]
    }

    pub fn jacobian(&self, t: usize) -> DMatrixView<'_, f64> {
        DMatrixView::from_slice(self.raw(t), self.p, self.dim)
    }
}

pub(crate) fn check_data(params: &ModelParams, y: &CountSeries) -> Result<()> {
    if y.p() != params.p() {
        return Err(Error::Shape(format!("series has {} columns, model has p = {}", y.p(), params.p())));
    }
    if y.is_empty() {
        return Err(Error::Empty("series has no observations".into()));
    }
    Ok(())
}

/// State path only, started from [`Presample::from_data`].
pub fn filter_intensity(params: &ModelParams, y: &CountSeries) -> Result<IntensityPath> {
    check_data(params, y)?;
    filter_from(params, y, &Presample::from_data(params.kind(), y))
}

pub(crate) fn filter_from(params: &ModelParams, y: &CountSeries, pre: &Presample) -> Result<IntensityPath> {
    let p = params.p();
    let kind = params.kind();
    let mut out = vec![0.0; y.n() * p];
    let mut input = pre.input.clone();
    params.step_into(&pre.state, &input, &mut out[..p]);
    for t in 1..y.n() {
        for (x, &v) in input.iter_mut().zip(y.row(t - 1)) {
            *x = kind.feedback(v as f64);
        }
        let (done, rest) = out.split_at_mut(t * p);
        params.step_into(&done[(t - 1) * p..], &input, &mut rest[..p]);
    }
    IntensityPath::new(p, out, kind.scale())
}

/// State path together with `∂state_t/∂θᵀ`.
///
/// `J_t = [I_p | (s_{t-1} ⊗ I_p)ᵀ | (x_{t-1} ⊗ I_p)ᵀ] + A J_{t-1}` where `s` is
/// the state (λ or ν) and `x` the transformed count (y or log(y + 1)).
pub fn filter_intensity_and_gradients(params: &ModelParams, y: &CountSeries) -> Result<(IntensityPath, GradientPath)> {
    check_data(params, y)?;
    let pre = Presample::from_data(params.kind(), y);
    let path = filter_from(params, y, &pre)?;
    let grads = gradients_along(params, y, &path, &pre);
    Ok((path, grads))
}

pub(crate) fn gradients_along(
    params: &ModelParams,
    y: &CountSeries,
    path: &IntensityPath,
    pre: &Presample,
) -> GradientPath {
    let p = params.p();
    let dim = theta_dim(p);
    let w = p * dim;
    let kind = params.kind();
    let a = params.a();
    let n = y.n();
    let mut values = vec![0.0; n * w];
    let mut input = vec![0.0; p];
    for t in 0..n {
        let (done, rest) = values.split_at_mut(t * w);
        let cur = &mut rest[..w];
        let state_prev: &[f64] = if t == 0 { &pre.state } else { path.row(t - 1) };
        if t == 0 {
            input.copy_from_slice(&pre.input);
        } else {
            for (x, &v) in input.iter_mut().zip(y.row(t - 1)) {
                *x = kind.feedback(v as f64);
            }
        }
        if t > 0 {
            let prev = &done[(t - 1) * w..];
            for k in 0..dim {
                for i in 0..p {
                    let mut s = 0.0;
                    for j in 0..p {
                        s += a[(i, j)] * prev[k * p + j];
                    }
                    cur[k * p + i] = s;
                }
            }
        }
        for i in 0..p {
            cur[i * p + i] += 1.0;
            for j in 0..p {
                cur[index_a(p, i, j) * p + i] += state_prev[j];
                cur[index_b(p, i, j) * p + i] += input[j];
            }
        }
    }
    GradientPath { p, dim, values }
}
