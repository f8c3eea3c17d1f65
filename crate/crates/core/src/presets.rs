//! Bivariate parameter sets used throughout the tests and the CLI.

use crate::model::{ModelKind, ModelParams};

/// Linear model with diagonal `A = diag(0.3, 0.25)`, `B = diag(0.5, 0.4)`, `d = (1, 2)`.
pub fn linear_diagonal() -> ModelParams {
    ModelParams::from_rows(&[1.0, 2.0], &[&[0.3, 0.0], &[0.0, 0.25]], &[&[0.5, 0.0], &[0.0, 0.4]], ModelKind::Linear)
        .expect("valid preset")
}

/// Linear model with cross effects; `|||A+B|||₂ ≈ 0.89` while `|||A|||₁ + |||B|||₁ = 1`.
pub fn linear_coupled() -> ModelParams {
    ModelParams::from_rows(&[0.5, 1.0], &[&[0.3, 0.05], &[0.1, 0.25]], &[&[0.5, 0.05], &[0.1, 0.4]], ModelKind::Linear)
        .expect("valid preset")
}

/// Log-linear model with a negative feedback coefficient.
pub fn loglinear_diagonal() -> ModelParams {
    ModelParams::from_rows(
        &[0.5, 1.0],
        &[&[-0.3, 0.0], &[0.0, 0.25]],
        &[&[0.5, 0.0], &[0.0, 0.4]],
        ModelKind::LogLinear,
    )
    .expect("valid preset")
}

/// Log-linear model with stronger persistence.
pub fn loglinear_persistent() -> ModelParams {
    ModelParams::from_rows(
        &[0.3, 0.5],
        &[&[0.4, 0.0], &[0.0, 0.45]],
        &[&[0.5, 0.0], &[0.0, 0.35]],
        ModelKind::LogLinear,
    )
    .expect("valid preset")
}

/// Looks a preset up by its CLI name.
pub fn by_name(name: &str) -> Option<ModelParams> {
    match name {
        "linear-diagonal" => Some(linear_diagonal()),
        "linear-coupled" => Some(linear_coupled()),
        "loglinear-diagonal" => Some(loglinear_diagonal()),
        "loglinear-persistent" => Some(loglinear_persistent()),
        _ => None,
    }
}

pub const NAMES: [&str; 4] = ["linear-diagonal", "linear-coupled", "loglinear-diagonal", "loglinear-persistent"];
