//! Conjugate linear-Gaussian model `u ~ N(0, Q⁻¹)`, `z | u ~ N(Hu, W⁻¹)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gmrf::{factorize, CsrMatrix, GaussianConditional, SparseSym};

#[derive(Debug, Clone)]
pub struct GaussianLinearModel {
    pub prior: SparseSym,
    pub design: CsrMatrix,
    pub noise_precision: Vec<f64>,
    pub z: Vec<f64>,
}

impl GaussianLinearModel {
    pub fn new(
        prior: SparseSym,
        design: CsrMatrix,
        noise_precision: Vec<f64>,
        z: Vec<f64>,
    ) -> Result<Self> {
        if design.ncols() != prior.dim()
            || design.nrows() != z.len()
            || z.len() != noise_precision.len()
        {
            return Err(Error::config(
                "inconsistent linear-Gaussian model dimensions",
            ));
        }
        if noise_precision.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::config("noise precisions must be positive"));
        }
        Ok(GaussianLinearModel {
            prior,
            design,
            noise_precision,
            z,
        })
    }

    pub fn posterior_precision(&self) -> SparseSym {
        let gram = self.design.weighted_gram(&self.noise_precision);
        self.prior
            .add_scaled(1.0, &gram, 1.0)
            .expect("dimensions checked")
    }

    fn rhs(&self) -> Vec<f64> {
        let wz: Vec<f64> = self
            .z
            .iter()
            .zip(&self.noise_precision)
            .map(|(z, t)| z * t)
            .collect();
        self.design.tr_mul_vec(&wz)
    }

    pub fn posterior(&self) -> Result<GaussianConditional> {
        let f = factorize(&self.posterior_precision())?;
        let mean = f.solve(&self.rhs());
        Ok(GaussianConditional::new(mean, f))
    }

    /// `log p(z)` through `log p(u) + log p(z|u) − log p(u|z)` at `u`.
    pub fn log_marginal_at(&self, u: &[f64]) -> Result<f64> {
        let prior_f = factorize(&self.prior)?;
        let post = self.posterior()?;
        let nu = u.len() as f64;
        let log_prior =
            -0.5 * nu * (2.0 * PI).ln() + 0.5 * prior_f.logdet() - 0.5 * self.prior.quad_form(u);
        let hu = self.design.mul_vec(u);
        let mut log_lik = -0.5 * self.z.len() as f64 * (2.0 * PI).ln();
        for ((z, m), t) in self.z.iter().zip(&hu).zip(&self.noise_precision) {
            log_lik += 0.5 * t.ln() - 0.5 * t * (z - m) * (z - m);
        }
        let d: Vec<f64> = u.iter().zip(post.mean()).map(|(a, b)| a - b).collect();
        let log_post = -0.5 * nu * (2.0 * PI).ln() + 0.5 * post.factor().logdet()
            - 0.5 * self.posterior_precision().quad_form(&d);
        Ok(log_prior + log_lik - log_post)
    }

    /// Exact `log p(z)`, evaluated at the posterior mean.
    pub fn log_marginal(&self) -> Result<f64> {
        let post = self.posterior()?;
        self.log_marginal_at(post.mean())
    }
}
