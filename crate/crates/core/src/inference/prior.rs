use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Priors on the transformed hyperparameters and the fixed effects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorSpec {
    /// Standard deviation of the zero-mean Gaussian prior on `β` and `a`.
    pub fixed_sd: f64,
    /// Gamma shape and rate on each noise precision.
    pub gamma_shape: f64,
    pub gamma_rate: f64,
    /// Variance of the Gaussian prior on `log((1+ρ)/(1−ρ))`.
    pub rho_var: f64,
    /// Standard deviation of the Gaussian priors on `log τ_ω` and `log κ`.
    pub theta_sd: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            fixed_sd: 100.0,
            gamma_shape: 0.01,
            gamma_rate: 0.01,
            rho_var: 0.15,
            theta_sd: 1.0,
        }
    }
}

fn log_normal(x: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - 0.5 * x * x / var
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let v = [
            self.fixed_sd,
            self.gamma_shape,
            self.gamma_rate,
            self.rho_var,
            self.theta_sd,
        ];
        if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::config(format!(
                "prior parameters must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Density of `log τ` when `τ ~ Γ(shape, rate)`.
    pub fn log_gamma_density(&self, log_tau: f64) -> f64 {
        let (a, b) = (self.gamma_shape, self.gamma_rate);
        a * b.ln() - ln_gamma(a) + a * log_tau - b * log_tau.exp()
    }

    /// Joint log prior of the transformed vector over the `active` entries.
    pub fn log_density(&self, theta: &[f64; 5], active: &[bool; 5]) -> f64 {
        let sd2 = self.theta_sd * self.theta_sd;
        let terms = [
            log_normal(theta[0], sd2),
            log_normal(theta[1], sd2),
            log_normal(theta[2], self.rho_var),
            self.log_gamma_density(theta[3]),
            self.log_gamma_density(theta[4]),
        ];
        terms
            .iter()
            .zip(active)
            .filter(|(_, &a)| a)
            .map(|(t, _)| t)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_gamma_integrates_to_one() {
        let p = PriorSpec {
            gamma_shape: 2.0,
            gamma_rate: 3.0,
            ..PriorSpec::default()
        };
        let h = 1e-3;
        let s: f64 = (-20_000..8_000)
            .map(|i| p.log_gamma_density(i as f64 * h).exp() * h)
            .sum();
        assert!((s - 1.0).abs() < 1e-6, "{s}");
    }

    #[test]
    fn rho_prior_is_a_variance() {
        let p = PriorSpec::default();
        let all = [false, false, true, false, false];
        let d0 = p.log_density(&[0.0; 5], &all);
        let d1 = p.log_density(&[0.0, 0.0, 1.0, 0.0, 0.0], &all);
        assert!((d0 - d1 - 0.5 / 0.15).abs() < 1e-12);
    }
}
