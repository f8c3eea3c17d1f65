//! Quasi-maximum likelihood estimation.
//!
//! The working likelihood is the product of the Poisson marginals, so the
//! copula never enters it. The score is computed with the derivative
//! recursions of the intensity filter, and standard errors come from the
//! sandwich `H⁻¹ G H⁻¹` with `G` the empirical outer product of score
//! contributions.

mod filter;
mod fit;
mod likelihood;
pub mod optimize;
mod theta;

pub use filter::{filter_intensity, filter_intensity_and_gradients, GradientPath, Presample};
pub use fit::{
    diagonal_mask, fit, pearson_residuals, predict_one_step, sandwich, starting_values, FitOptions, FitResult,
    HessianForm, Positivity,
};
pub use likelihood::{
    evaluate, hessian_and_information, information_from, loglik_from_path, observed_hessian, quasi_loglik, score,
    score_contributions, Evaluation,
};
pub use optimize::{BfgsOptions, Convergence, ConvergenceStatus};
pub use theta::{index_a, index_b, theta_dim, theta_labels, ThetaVector};
