use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spde::{convert_params, marginal_variance, practical_range};

/// Hyperparameters `Θ = (τ_ω, κ, ρ, τ₁, τ₂)`; `τ₁` and `τ₂` are the
/// satellite and in situ noise precisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub tau_omega: f64,
    pub kappa: f64,
    pub rho: f64,
    pub tau1: f64,
    pub tau2: f64,
}

impl Hyperparams {
    pub fn new(tau_omega: f64, kappa: f64, rho: f64, tau1: f64, tau2: f64) -> Result<Self> {
        let h = Hyperparams {
            tau_omega,
            kappa,
            rho,
            tau1,
            tau2,
        };
        h.validate()?;
        Ok(h)
    }

    /// From the marginal variance instead of `τ_ω`.
    pub fn from_variance(kappa: f64, sigma2: f64, rho: f64, tau1: f64, tau2: f64) -> Result<Self> {
        let p = convert_params(kappa, sigma2)?;
        Self::new(p.tau_omega, kappa, rho, tau1, tau2)
    }

    /// The generating values of the simulation study.
    pub fn simulation_truth() -> Self {
        Self::from_variance(7.0, 0.25, 0.7, 50.0, 50.0).expect("valid constants")
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [self.tau_omega, self.kappa, self.tau1, self.tau2];
        if pos.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::config(format!(
                "precisions and scales must be positive and finite: {self:?}"
            )));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::config(format!(
                "|rho| must be below 1, got {}",
                self.rho
            )));
        }
        Ok(())
    }

    /// `(log τ_ω, log κ, log((1+ρ)/(1−ρ)), log τ₁, log τ₂)`.
    pub fn to_theta(&self) -> [f64; 5] {
        [
            self.tau_omega.ln(),
            self.kappa.ln(),
            ((1.0 + self.rho) / (1.0 - self.rho)).ln(),
            self.tau1.ln(),
            self.tau2.ln(),
        ]
    }

    pub fn from_theta(theta: &[f64; 5]) -> Self {
        let e = theta[2].exp();
        // tanh form keeps |ρ| < 1 for extreme inputs
        let rho = if e.is_finite() {
            (e - 1.0) / (e + 1.0)
        } else {
            1.0
        };
        Hyperparams {
            tau_omega: theta[0].exp(),
            kappa: theta[1].exp(),
            rho: rho.clamp(-1.0 + 1e-15, 1.0 - 1e-15),
            tau1: theta[3].exp(),
            tau2: theta[4].exp(),
        }
    }

    pub fn sigma2(&self) -> f64 {
        marginal_variance(self.kappa, self.tau_omega)
    }

    pub fn range(&self) -> f64 {
        practical_range(self.kappa)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn truth() {
        let h = Hyperparams::simulation_truth();
        assert!((h.sigma2() - 0.25).abs() < 1e-12);
        assert!((h.tau_omega - 0.08060).abs() < 1e-5);
    }

    #[test]
    fn invalid() {
        assert!(Hyperparams::new(1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(Hyperparams::new(1.0, -1.0, 0.0, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn transform_roundtrip(lt in -5.0f64..5.0, lk in -3.0f64..4.0, rho in -0.99f64..0.99, l1 in -4.0f64..8.0, l2 in -4.0f64..8.0) {
            let h = Hyperparams::new(lt.exp(), lk.exp(), rho, l1.exp(), l2.exp()).unwrap();
            let back = Hyperparams::from_theta(&h.to_theta());
            prop_assert!(((back.tau_omega - h.tau_omega) / h.tau_omega).abs() < 1e-12);
            prop_assert!(((back.kappa - h.kappa) / h.kappa).abs() < 1e-12);
            prop_assert!((back.rho - h.rho).abs() < 1e-12);
            prop_assert!(((back.tau1 - h.tau1) / h.tau1).abs() < 1e-12);
            prop_assert!(((back.tau2 - h.tau2) / h.tau2).abs() < 1e-12);
        }
    }
}
