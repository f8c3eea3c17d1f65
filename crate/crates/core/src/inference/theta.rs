use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, ModelKind, ModelParams, Result};

/// Flat parameter vector `(d, vec A, vec B)` with column-major `vec`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaVector {
    p: usize,
    values: Vec<f64>,
}

/// `p (1 + 2p)`.
pub const fn theta_dim(p: usize) -> usize {
    p * (1 + 2 * p)
}

/// Position of `A[i, j]` in θ.
#[inline]
pub const fn index_a(p: usize, i: usize, j: usize) -> usize {
    p + j * p + i
}

/// Position of `B[i, j]` in θ.
#[inline]
pub const fn index_b(p: usize, i: usize, j: usize) -> usize {
    p + p * p + j * p + i
}

/// Names in θ order: `d1, a11, a21, …, b11, …` (1-based indices).
pub fn theta_labels(p: usize) -> Vec<String> {
    let mut out: Vec<String> = (0..p).map(|i| format!("d{}", i + 1)).collect();
    for m in ["a", "b"] {
        for j in 0..p {
            for i in 0..p {
                out.push(format!("{m}{}{}", i + 1, j + 1));
            }
        }
    }
    out
}

impl ThetaVector {
    pub fn new(p: usize, values: Vec<f64>) -> Result<Self> {
        if p == 0 || values.len() != theta_dim(p) {
            return Err(Error::Shape(format!(
                "theta of length {} does not match p = {p} (need {})",
                values.len(),
                theta_dim(p)
            )));
        }
        Ok(Self { p, values })
    }

    pub fn from_params(params: &ModelParams) -> Self {
        let mut values = Vec::with_capacity(theta_dim(params.p()));
        values.extend_from_slice(params.d().as_slice());
        values.extend_from_slice(params.a().as_slice());
        values.extend_from_slice(params.b().as_slice());
        Self { p: params.p(), values }
    }

    /// Builds parameters without sign checks; see [`ModelParams::new_sign_free`].
    pub fn to_params(&self, kind: ModelKind) -> Result<ModelParams> {
        let p = self.p;
        let pp = p * p;
        ModelParams::new_sign_free(
            DVector::from_column_slice(&self.values[..p]),
            DMatrix::from_column_slice(p, p, &self.values[p..p + pp]),
            DMatrix::from_column_slice(p, p, &self.values[p + pp..]),
            kind,
        )
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }

    pub fn labels(&self) -> Vec<String> {
        theta_labels(self.p)
    }
}
