//! BFGS ascent with Armijo backtracking.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop once the gradient max-norm falls below this.
    pub grad_tol: f64,
    /// Armijo sufficient-increase constant.
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iter: 500, grad_tol: 1e-8, armijo: 1e-4, max_backtracks: 60 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergenceStatus {
    Converged,
    /// No increase above rounding along the search direction, gradient small.
    Stalled,
    MaxIterations,
    LineSearchFailed,
}

impl ConvergenceStatus {
    pub fn is_success(self) -> bool {
        matches!(self, ConvergenceStatus::Converged | ConvergenceStatus::Stalled)
    }
}

impl std::fmt::Display for ConvergenceStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ConvergenceStatus::Converged => "converged",
            ConvergenceStatus::Stalled => "stalled",
            ConvergenceStatus::MaxIterations => "max-iterations",
            ConvergenceStatus::LineSearchFailed => "line-search-failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub status: ConvergenceStatus,
    /// Objective after each accepted iteration, starting value first.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Maximum {
    pub x: DVector<f64>,
    pub value: f64,
    pub gradient: DVector<f64>,
    pub convergence: Convergence,
}

/// Gradient max-norm below which a failed line search counts as [`ConvergenceStatus::Stalled`].
const STALL_GRAD: f64 = 1e-5;

/// Relative gain treated as rounding noise.
const ROUNDING_GAIN: f64 = 16.0 * f64::EPSILON;

/// Maximizes `f`, which returns the value and gradient or `None` where the
/// objective is undefined (treated as −∞ by the line search).
///
/// Returns `None` only if `f` is undefined at `x0`.
pub fn maximize<F>(mut f: F, x0: DVector<f64>, opts: &BfgsOptions) -> Option<Maximum>
where
    F: FnMut(&DVector<f64>) -> Option<(f64, DVector<f64>)>,
{
    let n = x0.len();
    let (mut fx, mut g) = f(&x0)?;
    let mut x = x0;
    // approximation to the inverse of the negative Hessian
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut trace = vec![fx];
    let mut iterations = 0;
    let mut scaled = false;

    let status = loop {
        if g.amax() < opts.grad_tol {
            break ConvergenceStatus::Converged;
        }
        if iterations >= opts.max_iter {
            break ConvergenceStatus::MaxIterations;
        }
        let mut dir = &hinv * &g;
        let mut slope = g.dot(&dir);
        if !(slope > 0.0) {
            hinv = DMatrix::identity(n, n);
            dir = g.clone();
            slope = g.dot(&g);
        }
        let mut step = if scaled { 1.0 } else { (1.0 / dir.amax()).min(1.0) };
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let trial = &x + step * &dir;
            if let Some((ft, gt)) = f(&trial) {
                if ft.is_finite() && ft >= fx + opts.armijo * step * slope {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, fxn, gn)) = accepted else {
            break if g.amax() < STALL_GRAD { ConvergenceStatus::Stalled } else { ConvergenceStatus::LineSearchFailed };
        };
        iterations += 1;
        let gain = fxn - fx;
        let s = &xn - &x;
        // ascent on f is descent on -f: y = ∇(-f)_{new} - ∇(-f)_{old}
        let yv = &g - &gn;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            if !scaled {
                hinv = DMatrix::identity(n, n) * (sy / yv.dot(&yv));
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &yv;
            let yhy = yv.dot(&hy);
            // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
            hinv += (rho * rho * yhy + rho) * (&s * s.transpose()) - rho * (&hy * s.transpose() + &s * hy.transpose());
        }
        x = xn;
        fx = fxn;
        g = gn;
        trace.push(fx);
        // gains at the rounding level of the objective carry no information
        if gain <= ROUNDING_GAIN * fx.abs().max(1.0) && g.amax() < STALL_GRAD {
            break if g.amax() < opts.grad_tol { ConvergenceStatus::Converged } else { ConvergenceStatus::Stalled };
        }
    };

    Some(Maximum {
        value: fx,
        convergence: Convergence { iterations, gradient_norm: g.amax(), status, trace },
        gradient: g,
        x,
    })
}
