//! Finite-element discretisation of the Matérn SPDE.

mod bessel;
mod fem;
mod matern;

pub use bessel::{bessel_k0, bessel_k1};
pub use fem::{fem_matrices, precision_spatial, FemMatrices, SpdeOperator};
pub use matern::{convert_params, marginal_variance, matern_cov, practical_range, SpdeParams, NU};
