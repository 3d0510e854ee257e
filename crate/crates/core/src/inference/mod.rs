//! Exact latent marginalisation, hyperparameter exploration and prediction.

mod evaluator;
mod fit;
mod linear;
mod nelder_mead;
mod predict;
mod prior;

pub use evaluator::{Evaluation, Evaluator};
pub use fit::{
    active_hyperparams, fit, fit_from_grid, latent_posterior, log_marginal_likelihood,
    mixture_quantile, FitResult, GridPoint, GridStrategy, OptimizerConfig, ParamSummary,
    THETA_NAMES,
};
pub use linear::GaussianLinearModel;
pub use nelder_mead::{Minimum, NelderMead};
pub use predict::{
    predict, predict_mean, sample_posterior, PosteriorSamples, Prediction, Target, TargetSite,
};
pub use prior::PriorSpec;

#[cfg(test)]
mod tests;
