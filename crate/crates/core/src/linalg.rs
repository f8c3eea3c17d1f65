//! Small dense solves with an explicit pivot tolerance.
//!
//! Dimensions here are tiny (p up to ~10, d = p(1+2p)), so plain Gaussian
//! elimination with partial pivoting is used and the pivot threshold is
//! reported instead of silently producing garbage.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

pub const PIVOT_TOL: f64 = 1e-12;

/// Solves `m x = rhs` for every column of `rhs`.
pub fn solve_many(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if m.ncols() != n || rhs.nrows() != n {
        return Err(Error::Shape(format!(
            "cannot solve {}x{} system with {} right-hand rows",
            m.nrows(),
            m.ncols(),
            rhs.nrows()
        )));
    }
    let mut a = m.clone();
    let mut x = rhs.clone();
    for col in 0..n {
        let (piv, mag) =
            (col..n)
                .map(|r| (r, a[(r, col)].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(mag > PIVOT_TOL) {
            return Err(Error::Singular { pivot: mag.max(0.0) });
        }
        if piv != col {
            a.swap_rows(piv, col);
            x.swap_rows(piv, col);
        }
        let pivot = a[(col, col)];
        for r in col + 1..n {
            let f = a[(r, col)] / pivot;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[(r, c)] -= f * a[(col, c)];
            }
            for c in 0..x.ncols() {
                x[(r, c)] -= f * x[(col, c)];
            }
        }
    }
    for c in 0..x.ncols() {
        for r in (0..n).rev() {
            let mut s = x[(r, c)];
            for k in r + 1..n {
                s -= a[(r, k)] * x[(k, c)];
            }
            x[(r, c)] = s / a[(r, r)];
        }
    }
    Ok(x)
}

pub fn solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let b = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
    let x = solve_many(m, &b)?;
    Ok(DVector::from_column_slice(x.as_slice()))
}

pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    solve_many(m, &DMatrix::identity(m.nrows(), m.nrows()))
}

/// Largest modulus among the eigenvalues of a square matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Cholesky-based positive definiteness check after symmetrizing.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    let sym = (m + m.transpose()) * 0.5;
    nalgebra::Cholesky::new(sym).is_some()
}
