use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("matrix is singular to working precision (pivot magnitude {pivot:e})")]
    Singular { pivot: f64 },

    #[error("non-positive intensity {value} at t = {t}, component {component}")]
    NonPositiveIntensity { t: usize, component: usize, value: f64 },

    #[error("copula-Poisson draw needed more than {0} copula rows")]
    DrawCeiling(usize),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("empty input: {0}")]
    Empty(String),
}
