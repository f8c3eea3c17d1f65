use nalgebra::{DMatrix, DVector};

use super::filter::{check_data, filter_from, gradients_along, GradientPath, Presample};
use super::theta::{index_a, theta_dim};
use crate::{CountSeries, Error, IntensityPath, ModelKind, ModelParams, Result};

/// `Σ_t Σ_i (y log λ − λ)` for a given intensity path (no `log y!` terms).
pub fn loglik_from_path(path: &IntensityPath, y: &CountSeries) -> Result<f64> {
    if path.n() != y.n() || path.p() != y.p() {
        return Err(Error::Shape("intensity path and series differ in shape".into()));
    }
    let mut total = 0.0;
    for t in 0..y.n() {
        for (i, &c) in y.row(t).iter().enumerate() {
            let c = c as f64;
            let v = path.row(t)[i];
            total += match path.scale() {
                crate::Scale::Mean => {
                    if c > 0.0 {
                        c * v.ln() - v
                    } else {
                        -v
                    }
                }
                crate::Scale::LogMean => c * v - v.exp(),
            };
        }
    }
    if !total.is_finite() {
        return Err(Error::Degenerate(format!("quasi log-likelihood is {total}")));
    }
    Ok(total)
}

pub fn quasi_loglik(params: &ModelParams, y: &CountSeries) -> Result<f64> {
    check_data(params, y)?;
    let path = filter_from(params, y, &Presample::from_data(params.kind(), y))?;
    loglik_from_path(&path, y)
}

/// Everything the estimator needs at one θ.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loglik: f64,
    pub score: DVector<f64>,
    pub path: IntensityPath,
    pub grads: GradientPath,
}

/// Per-time residual factor multiplying `J_t` in the score:
/// `y/λ − 1` (linear) or `y − exp(ν)` (log-linear).
#[inline]
fn residual_factor(kind: ModelKind, state: f64, y: f64) -> f64 {
    match kind {
        ModelKind::Linear => y / state - 1.0,
        ModelKind::LogLinear => y - state.exp(),
    }
}

/// Weight in the expected Hessian: `1/λ` (linear) or `exp(ν)` (log-linear).
#[inline]
fn info_weight(kind: ModelKind, state: f64) -> f64 {
    match kind {
        ModelKind::Linear => 1.0 / state,
        ModelKind::LogLinear => state.exp(),
    }
}

pub fn evaluate(params: &ModelParams, y: &CountSeries) -> Result<Evaluation> {
    check_data(params, y)?;
    let pre = Presample::from_data(params.kind(), y);
    let path = filter_from(params, y, &pre)?;
    let loglik = loglik_from_path(&path, y)?;
    let grads = gradients_along(params, y, &path, &pre);
    let p = params.p();
    let dim = theta_dim(p);
    let mut score = DVector::zeros(dim);
    for t in 0..y.n() {
        let j = grads.raw(t);
        for i in 0..p {
            let r = residual_factor(params.kind(), path.row(t)[i], y.row(t)[i] as f64);
            for k in 0..dim {
                score[k] += j[k * p + i] * r;
            }
        }
    }
    Ok(Evaluation { loglik, score, path, grads })
}

/// Analytic score `Σ_t J_tᵀ D_t⁻¹ (Y_t − λ_t)` (linear) or `Σ_t J_tᵀ (Y_t − e^{ν_t})`.
pub fn score(params: &ModelParams, y: &CountSeries) -> Result<DVector<f64>> {
    Ok(evaluate(params, y)?.score)
}

/// Per-observation score contributions, one row per time point.
pub fn score_contributions(params: &ModelParams, y: &CountSeries, eval: &Evaluation) -> DMatrix<f64> {
    let p = params.p();
    let dim = theta_dim(p);
    let mut out = DMatrix::zeros(y.n(), dim);
    for t in 0..y.n() {
        let j = eval.grads.raw(t);
        for i in 0..p {
            let r = residual_factor(params.kind(), eval.path.row(t)[i], y.row(t)[i] as f64);
            for k in 0..dim {
                out[(t, k)] += j[k * p + i] * r;
            }
        }
    }
    out
}

/// Expected-form `H_n = Σ_t J_tᵀ W_t J_t` and empirical `G_n = Σ_t s_t s_tᵀ`.
pub fn information_from(params: &ModelParams, y: &CountSeries, eval: &Evaluation) -> (DMatrix<f64>, DMatrix<f64>) {
    let p = params.p();
    let dim = theta_dim(p);
    let mut h = DMatrix::zeros(dim, dim);
    let mut g = DMatrix::zeros(dim, dim);
    let mut s = vec![0.0; dim];
    for t in 0..y.n() {
        let j = eval.grads.raw(t);
        s.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..p {
            let state = eval.path.row(t)[i];
            let w = info_weight(params.kind(), state);
            let r = residual_factor(params.kind(), state, y.row(t)[i] as f64);
            for k in 0..dim {
                let jk = j[k * p + i];
                s[k] += jk * r;
                let wk = w * jk;
                for l in 0..=k {
                    h[(k, l)] += wk * j[l * p + i];
                }
            }
        }
        for k in 0..dim {
            for l in 0..=k {
                g[(k, l)] += s[k] * s[l];
            }
        }
    }
    symmetrize_lower(&mut h);
    symmetrize_lower(&mut g);
    (h, g)
}

fn symmetrize_lower(m: &mut DMatrix<f64>) {
    for k in 0..m.nrows() {
        for l in 0..k {
            m[(l, k)] = m[(k, l)];
        }
    }
}

/// `(H_n, G_n)`; see [`information_from`].
pub fn hessian_and_information(params: &ModelParams, y: &CountSeries) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let eval = evaluate(params, y)?;
    Ok(information_from(params, y, &eval))
}

/// Negative second derivative of the quasi log-likelihood, computed exactly.
///
/// Adds to the expected form the term `−Σ_t Σ_i r_{i,t} ∂²s_{i,t}/∂θ∂θᵀ`
/// (with `y/λ²` in place of `1/λ` for the linear model), whose conditional
/// expectation vanishes at the true θ.
pub fn observed_hessian(params: &ModelParams, y: &CountSeries) -> Result<DMatrix<f64>> {
    let eval = evaluate(params, y)?;
    let p = params.p();
    let dim = theta_dim(p);
    let kind = params.kind();
    let a = params.a();
    let n = y.n();
    // second[i] = ∂²s_{i,t}/∂θ∂θᵀ, stored dim×dim column-major per component
    let block = dim * dim;
    let mut second = vec![0.0; p * block];
    let mut next = vec![0.0; p * block];
    let mut out = DMatrix::zeros(dim, dim);
    for t in 0..n {
        if t > 0 {
            let jprev = eval.grads.raw(t - 1);
            for i in 0..p {
                let dst = &mut next[i * block..(i + 1) * block];
                dst.iter_mut().for_each(|v| *v = 0.0);
                for jx in 0..p {
                    let aij = a[(i, jx)];
                    if aij != 0.0 {
                        let src = &second[jx * block..(jx + 1) * block];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += aij * s;
                        }
                    }
                    // ∂A_{i,jx}/∂θ_k = 1 for k = index_a(i, jx)
                    let k = index_a(p, i, jx);
                    for l in 0..dim {
                        let v = jprev[l * p + jx];
                        dst[l * dim + k] += v;
                        dst[k * dim + l] += v;
                    }
                }
            }
            std::mem::swap(&mut second, &mut next);
        }
        let j = eval.grads.raw(t);
        for i in 0..p {
            let state = eval.path.row(t)[i];
            let c = y.row(t)[i] as f64;
            let (w, r) = match kind {
                ModelKind::Linear => (c / (state * state), c / state - 1.0),
                ModelKind::LogLinear => (state.exp(), c - state.exp()),
            };
            let sec = &second[i * block..(i + 1) * block];
            for l in 0..dim {
                for k in 0..dim {
                    out[(k, l)] += w * j[k * p + i] * j[l * p + i] - r * sec[l * dim + k];
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::CopulaSpec;
    use crate::inference::theta::ThetaVector;
    use crate::presets;
    use crate::simulate::{simulate, SimulationConfig};
    use rand::Rng;

    fn random_series(p: usize, n: usize, seed: u64) -> CountSeries {
        let mut rng = crate::rng::stream(seed, 0);
        CountSeries::new(p, (0..n * p).map(|_| rng.random_range(0..8u64)).collect()).unwrap()
    }

    fn shifted(params: &ModelParams, k: usize, delta: f64) -> ModelParams {
        let theta = ThetaVector::from_params(params);
        let mut v = theta.as_slice().to_vec();
        v[k] += delta;
        ThetaVector::new(params.p(), v).unwrap().to_params(params.kind()).unwrap()
    }

    fn intercept_only(d: &[f64]) -> ModelParams {
        let p = d.len();
        ModelParams::new(DVector::from_column_slice(d), DMatrix::zeros(p, p), DMatrix::zeros(p, p), ModelKind::Linear)
            .unwrap()
    }

    #[test]
    fn single_point_values() {
        let y = CountSeries::from_rows(&[[2u64, 1]]).unwrap();
        assert!((quasi_loglik(&intercept_only(&[1.0, 1.0]), &y).unwrap() + 2.0).abs() < 1e-15);
        let y = CountSeries::from_rows(&[[0u64, 0]]).unwrap();
        assert!((quasi_loglik(&intercept_only(&[1.0, 2.0]), &y).unwrap() + 3.0).abs() < 1e-15);
    }

    #[test]
    fn appending_a_matching_point_adds_its_term() {
        let params = intercept_only(&[3.0, 5.0]);
        let y1 = CountSeries::from_rows(&[[2u64, 7], [4, 1]]).unwrap();
        let y2 = CountSeries::from_rows(&[[2u64, 7], [4, 1], [3, 5]]).unwrap();
        let diff = quasi_loglik(&params, &y2).unwrap() - quasi_loglik(&params, &y1).unwrap();
        let want: f64 = [3.0f64, 5.0].iter().map(|l| l * l.ln() - l).sum();
        assert!((diff - want).abs() < 1e-12);
    }

    #[test]
    fn score_vanishes_when_counts_equal_intensity() {
        // With A = B = 0 the intensity is d at every t; d integer makes y = λ possible.
        let params = intercept_only(&[3.0, 5.0]);
        let y = CountSeries::from_rows(&[[3u64, 5], [3, 5], [3, 5]]).unwrap();
        let s = score(&params, &y).unwrap();
        assert!(s.amax() < 1e-12, "{s}");
    }

    #[test]
    fn score_matches_finite_differences() {
        for (seed, params) in [(3, presets::linear_coupled()), (4, presets::loglinear_diagonal())] {
            let y = random_series(2, 20, seed);
            let s = score(&params, &y).unwrap();
            let h = 1e-6;
            for k in 0..s.len() {
                let fd = (quasi_loglik(&shifted(&params, k, h), &y).unwrap()
                    - quasi_loglik(&shifted(&params, k, -h), &y).unwrap())
                    / (2.0 * h);
                assert!((fd - s[k]).abs() / s[k].abs().max(1.0) < 1e-6, "k={k}: {fd} vs {}", s[k]);
            }
        }
    }

    #[test]
    fn observed_hessian_matches_finite_differences_of_score() {
        for (seed, params) in [(5, presets::linear_coupled()), (6, presets::loglinear_diagonal())] {
            let y = random_series(2, 25, seed);
            let hobs = observed_hessian(&params, &y).unwrap();
            let h = 1e-5;
            for k in 0..hobs.ncols() {
                let fd = (score(&shifted(&params, k, h), &y).unwrap() - score(&shifted(&params, k, -h), &y).unwrap())
                    / (2.0 * h);
                for l in 0..hobs.nrows() {
                    let want = -fd[l];
                    let got = hobs[(l, k)];
                    assert!((want - got).abs() / got.abs().max(1.0) < 1e-5, "({l},{k}): {want} vs {got}");
                }
            }
        }
    }

    #[test]
    fn univariate_expected_hessian_oracle() {
        let params = ModelParams::from_rows(&[1.2], &[&[0.35]], &[&[0.4]], ModelKind::Linear).unwrap();
        let y = random_series(1, 60, 9);
        let (h, _) = hessian_and_information(&params, &y).unwrap();
        // hand-rolled univariate recursion
        let ybar = y.column_means()[0];
        let (d, a, b) = (1.2, 0.35, 0.4);
        let (mut lam_prev, mut y_prev) = (ybar, ybar);
        let mut g = [0.0f64; 3];
        let mut want = [[0.0f64; 3]; 3];
        for t in 0..y.n() {
            let lam = d + a * lam_prev + b * y_prev;
            g = [1.0 + a * g[0], lam_prev + a * g[1], y_prev + a * g[2]];
            for k in 0..3 {
                for l in 0..3 {
                    want[k][l] += g[k] * g[l] / lam;
                }
            }
            lam_prev = lam;
            y_prev = y.row(t)[0] as f64;
        }
        for k in 0..3 {
            for l in 0..3 {
                assert!((h[(k, l)] - want[k][l]).abs() < 1e-10 * want[k][l].abs().max(1.0));
            }
        }
    }

    #[test]
    fn expected_hessian_is_positive_definite() {
        let params = presets::linear_coupled();
        let (y, _) = simulate(&params, CopulaSpec::clayton(2.0), &SimulationConfig::new(200).with_seed(2)).unwrap();
        let (h, g) = hessian_and_information(&params, &y).unwrap();
        assert!(crate::linalg::is_positive_definite(&h));
        assert!((&g - g.transpose()).amax() == 0.0);
    }

    #[test]
    fn nonpositive_linear_intensity_is_an_error() {
        let params = ModelParams::from_rows(
            &[0.1, 0.1],
            &[&[0.0, 0.0], &[0.0, 0.0]],
            &[&[0.0, -1.0], &[0.0, 0.0]],
            ModelKind::Linear,
        );
        assert!(params.is_err());
        let theta = ThetaVector::new(2, vec![0.1, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0]).unwrap();
        let params = theta.to_params(ModelKind::Linear).unwrap();
        let y = CountSeries::from_rows(&[[1u64, 3], [0, 4], [1, 1]]).unwrap();
        assert!(quasi_loglik(&params, &y).is_err());
    }
}
