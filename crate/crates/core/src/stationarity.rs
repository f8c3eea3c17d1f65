//! Induced matrix norms and the sufficient stationarity conditions built on them.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::model::{ModelKind, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// Maximum absolute column sum.
    One,
    /// Largest singular value.
    Two,
    Frobenius,
}

/// Above this size the spectral norm switches from a dense symmetric
/// eigen-solve to power iteration.
const DENSE_EIGEN_LIMIT: usize = 50;

pub fn operator_norm(m: &DMatrix<f64>, which: NormKind) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    match which {
        NormKind::One => m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max),
        NormKind::Frobenius => m.iter().map(|v| v * v).sum::<f64>().sqrt(),
        NormKind::Two => {
            // Gram matrix on the smaller side.
            let gram = if m.ncols() <= m.nrows() { m.transpose() * m } else { m * m.transpose() };
            let top = if gram.nrows() > DENSE_EIGEN_LIMIT {
                power_iteration(&gram)
            } else {
                gram.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max)
            };
            top.max(0.0).sqrt()
        }
    }
}

/// Dominant eigenvalue of a symmetric positive semidefinite matrix.
fn power_iteration(gram: &DMatrix<f64>) -> f64 {
    let n = gram.nrows();
    let mut v = nalgebra::DVector::from_fn(n, |i, _| 1.0 + (i as f64) * 1e-3);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let w = gram * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - lambda).abs() <= 1e-15 * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// One sufficient condition and whether it holds.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Condition {
    pub name: &'static str,
    pub expression: &'static str,
    pub value: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StationarityReport {
    pub kind: ModelKind,
    pub norm2_a_plus_b: f64,
    pub norm1_a_plus_norm1_b: f64,
    pub norm2_a_plus_norm2_b: f64,
    /// Partial sum of `Σ_j |||A^j B|||₂`.
    pub series_sum: f64,
    /// Last `j` included in `series_sum`.
    pub series_truncation_j: usize,
    /// False when `max_j` was reached before the increments fell below `tol`.
    pub series_converged: bool,
    pub conditions: Vec<Condition>,
}

impl StationarityReport {
    pub fn all_hold(&self) -> bool {
        self.conditions.iter().all(|c| c.holds)
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

pub const DEFAULT_SERIES_TOL: f64 = 1e-12;
pub const DEFAULT_SERIES_MAX_J: usize = 10_000;

pub fn check_conditions(params: &ModelParams, tol: f64, max_j: usize) -> StationarityReport {
    let (a, b) = (params.a(), params.b());
    let norm2_a_plus_b = operator_norm(&(a + b), NormKind::Two);
    let norm1_a_plus_norm1_b = operator_norm(a, NormKind::One) + operator_norm(b, NormKind::One);
    let norm2_a_plus_norm2_b = operator_norm(a, NormKind::Two) + operator_norm(b, NormKind::Two);

    let mut series_sum = 0.0;
    let mut series_truncation_j = max_j;
    let mut series_converged = false;
    let mut a_pow_b = b.clone();
    for j in 0..=max_j {
        let inc = operator_norm(&a_pow_b, NormKind::Two);
        series_sum += inc;
        if inc < tol {
            series_truncation_j = j;
            series_converged = true;
            break;
        }
        a_pow_b = a * a_pow_b;
    }
    if !series_converged {
        log::warn!("series Σ|||A^j B|||₂ not converged after j = {max_j}");
    }

    let series =
        Condition { name: "series", expression: "sum_j |||A^j B|||_2 < 1", value: series_sum, holds: series_sum < 1.0 };
    let weak = Condition {
        name: "weak-dependence",
        expression: "|||A|||_1 + |||B|||_1 < 1",
        value: norm1_a_plus_norm1_b,
        holds: norm1_a_plus_norm1_b < 1.0,
    };
    let conditions = match params.kind() {
        ModelKind::Linear => vec![
            Condition {
                name: "perturbation",
                expression: "|||A+B|||_2 < 1",
                value: norm2_a_plus_b,
                holds: norm2_a_plus_b < 1.0,
            },
            weak,
            series,
        ],
        ModelKind::LogLinear => vec![
            Condition {
                name: "perturbation",
                expression: "|||A|||_2 + |||B|||_2 < 1",
                value: norm2_a_plus_norm2_b,
                holds: norm2_a_plus_norm2_b < 1.0,
            },
            weak,
            series,
        ],
    };

    StationarityReport {
        kind: params.kind(),
        norm2_a_plus_b,
        norm1_a_plus_norm1_b,
        norm2_a_plus_norm2_b,
        series_sum,
        series_truncation_j,
        series_converged,
        conditions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mat(p: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(p, p, v)
    }

    #[test]
    fn norms_by_hand() {
        assert_relative_eq!(operator_norm(&mat(2, &[0.3, 0.0, 0.0, 0.25]), NormKind::Two), 0.3, epsilon = 1e-15);
        assert_relative_eq!(operator_norm(&mat(2, &[0.3, 0.05, 0.1, 0.25]), NormKind::One), 0.4, epsilon = 1e-15);
        assert_relative_eq!(operator_norm(&mat(2, &[3.0, 0.0, 4.0, 0.0]), NormKind::Frobenius), 5.0);
        assert_eq!(operator_norm(&DMatrix::zeros(0, 0), NormKind::Two), 0.0);
        // rectangular: singular value of a row vector is its Euclidean norm
        assert_relative_eq!(
            operator_norm(&DMatrix::from_row_slice(1, 2, &[3.0, 4.0]), NormKind::Two),
            5.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn coupled_preset_norms() {
        let m = presets::linear_coupled();
        let n2 = operator_norm(&(m.a() + m.b()), NormKind::Two);
        assert!((n2 - 0.89).abs() < 0.005, "{n2}");
        let r = check_conditions(&m, DEFAULT_SERIES_TOL, DEFAULT_SERIES_MAX_J);
        assert!(r.condition("perturbation").unwrap().holds);
        assert_eq!(r.norm1_a_plus_norm1_b, 1.0);
        assert!(!r.condition("weak-dependence").unwrap().holds);
    }

    #[test]
    fn diagonal_preset_passes() {
        let r = check_conditions(&presets::linear_diagonal(), DEFAULT_SERIES_TOL, DEFAULT_SERIES_MAX_J);
        assert_relative_eq!(r.norm2_a_plus_b, 0.8, epsilon = 1e-14);
        assert_relative_eq!(r.norm1_a_plus_norm1_b, 0.8, epsilon = 1e-14);
        // Σ_j 0.3^j 0.5 = 0.5/0.7
        assert_relative_eq!(r.series_sum, 0.5 / 0.7, epsilon = 1e-11);
        assert!(r.series_converged);
        assert!(r.all_hold());
    }

    #[test]
    fn zero_matrices_pass_with_zero() {
        let z = DMatrix::zeros(3, 3);
        let m = ModelParams::new(nalgebra::DVector::from_element(3, 1.0), z.clone(), z, ModelKind::LogLinear).unwrap();
        let r = check_conditions(&m, DEFAULT_SERIES_TOL, DEFAULT_SERIES_MAX_J);
        assert!(r.all_hold());
        assert!(r.conditions.iter().all(|c| c.value == 0.0));
        assert_eq!(r.series_truncation_j, 0);
    }

    #[test]
    fn unconverged_series_is_flagged() {
        let m = ModelParams::from_rows(&[1.0], &[&[0.999]], &[&[0.01]], ModelKind::Linear).unwrap();
        let r = check_conditions(&m, 1e-12, 10);
        assert!(!r.series_converged);
        assert_eq!(r.series_truncation_j, 10);
    }

    #[test]
    fn power_iteration_agrees_with_dense() {
        let n = 60;
        let m = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 13) % 11) as f64 / 50.0 - 0.1);
        let gram = m.transpose() * &m;
        let dense = gram.symmetric_eigenvalues().iter().copied().fold(0.0, f64::max);
        assert_relative_eq!(operator_norm(&m, NormKind::Two), dense.sqrt(), max_relative = 1e-10);
    }

    #[test]
    fn commuting_psd_norms_add() {
        // simultaneously diagonalizable: A = Q D1 Qᵀ, B = Q D2 Qᵀ with aligned top eigenvector
        let c = 0.6f64;
        let s = 0.8f64;
        let q = mat(2, &[c, -s, s, c]);
        let a = &q * mat(2, &[0.4, 0.0, 0.0, 0.1]) * q.transpose();
        let b = &q * mat(2, &[0.3, 0.0, 0.0, 0.2]) * q.transpose();
        assert_relative_eq!((&a * &b - &b * &a).norm(), 0.0, epsilon = 1e-15);
        let lhs = operator_norm(&(&a + &b), NormKind::Two);
        let rhs = operator_norm(&a, NormKind::Two) + operator_norm(&b, NormKind::Two);
        assert!((lhs - rhs).abs() < 1e-10);
    }

    fn small_matrix() -> impl Strategy<Value = DMatrix<f64>> {
        (1usize..5).prop_flat_map(|p| {
            proptest::collection::vec(-1.0f64..1.0, p * p).prop_map(move |v| DMatrix::from_vec(p, p, v))
        })
    }

    proptest! {
        #[test]
        fn spectral_norm_is_subadditive(a in small_matrix(), scale in 0.1f64..2.0) {
            let p = a.nrows();
            let b = DMatrix::from_fn(p, p, |i, j| scale * ((i + 2 * j) as f64).sin());
            let lhs = operator_norm(&(&a + &b), NormKind::Two);
            let rhs = operator_norm(&a, NormKind::Two) + operator_norm(&b, NormKind::Two);
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn series_bounded_by_geometric_sum(a in small_matrix(), bscale in 0.0f64..1.0) {
            let p = a.nrows();
            let na = operator_norm(&a, NormKind::Two);
            prop_assume!(na < 0.95);
            let b = DMatrix::from_fn(p, p, |i, j| bscale * ((3 * i + j) as f64).cos());
            let m = ModelParams::new(nalgebra::DVector::from_element(p, 0.1), a, b.clone(), ModelKind::LogLinear).unwrap();
            let r = check_conditions(&m, 1e-14, 100_000);
            let bound = operator_norm(&b, NormKind::Two) / (1.0 - na);
            prop_assert!(r.series_sum <= bound * (1.0 + 1e-10) + 1e-12);
        }
    }
}
