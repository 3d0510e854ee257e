//! Sparse symmetric linear algebra for Gaussian Markov random fields.

mod cholesky;
mod conditional;
mod ordering;
mod precision;
mod sparse;

pub use cholesky::{factorize, CholeskyFactor, SelectedInverse, SymbolicCholesky, JITTER_LEVELS};
pub use conditional::{sample_gmrf, GaussianConditional};
pub use ordering::{minimum_degree, nested_dissection};
pub use precision::{ar1_logdet, kron_precision, precision_ar1};
pub use sparse::{CsrMatrix, SparseSym};
