//! Matérn covariance (smoothness 1) and the SPDE parameter map.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::bessel::bessel_k1;
use crate::error::{Error, Result};

/// Smoothness of the field; the operator order is `nu + 1` in the plane.
pub const NU: f64 = 1.0;

/// Matérn covariance with smoothness 1: `σ²·κd·K₁(κd)`, equal to `σ²` at 0.
pub fn matern_cov(d: f64, kappa: f64, sigma2: f64) -> f64 {
    let x = kappa * d;
    if x == 0.0 {
        sigma2
    } else {
        sigma2 * x * bessel_k1(x)
    }
}

/// Marginal variance implied by `(κ, τ_ω)`.
pub fn marginal_variance(kappa: f64, tau_omega: f64) -> f64 {
    1.0 / (4.0 * PI * kappa * kappa * tau_omega * tau_omega)
}

/// Distance at which the correlation has dropped to about 0.14.
pub fn practical_range(kappa: f64) -> f64 {
    (8.0 * NU).sqrt() / kappa
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdeParams {
    pub kappa: f64,
    pub tau_omega: f64,
    pub sigma2_omega: f64,
    pub nu: f64,
    pub alpha: f64,
    pub range: f64,
}

impl SpdeParams {
    pub fn from_kappa_tau(kappa: f64, tau_omega: f64) -> Result<Self> {
        if !(kappa > 0.0 && tau_omega > 0.0) || !kappa.is_finite() || !tau_omega.is_finite() {
            return Err(Error::config(format!(
                "kappa and tau_omega must be positive, got {kappa} and {tau_omega}"
            )));
        }
        Ok(SpdeParams {
            kappa,
            tau_omega,
            sigma2_omega: marginal_variance(kappa, tau_omega),
            nu: NU,
            alpha: NU + 1.0,
            range: practical_range(kappa),
        })
    }
}

/// Parameters from scale and marginal variance.
pub fn convert_params(kappa: f64, sigma2: f64) -> Result<SpdeParams> {
    if !(kappa > 0.0 && sigma2 > 0.0) || !kappa.is_finite() || !sigma2.is_finite() {
        return Err(Error::config(format!(
            "kappa and sigma2 must be positive, got {kappa} and {sigma2}"
        )));
    }
    let tau_omega = 1.0 / (kappa * (4.0 * PI * sigma2).sqrt());
    Ok(SpdeParams {
        kappa,
        tau_omega,
        sigma2_omega: sigma2,
        nu: NU,
        alpha: NU + 1.0,
        range: practical_range(kappa),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulation_truths() {
        let p = convert_params(7.0, 0.25).unwrap();
        assert!((p.tau_omega - 0.080_60).abs() < 5e-6);
        assert!((p.range - 0.4041).abs() < 5e-5);
        assert!((marginal_variance(p.kappa, p.tau_omega) - 0.25).abs() < 1e-12);
        assert!((p.range - 8f64.sqrt() / 7.0).abs() < 1e-12);
    }

    #[test]
    fn scaling() {
        let a = convert_params(3.0, 0.5).unwrap();
        let b = convert_params(6.0, 0.5).unwrap();
        assert!((b.range - a.range / 2.0).abs() < 1e-12);
        assert!((b.tau_omega - a.tau_omega / 2.0).abs() < 1e-12);
        let c = SpdeParams::from_kappa_tau(a.kappa, a.tau_omega).unwrap();
        assert!((c.sigma2_omega - 0.5).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_rejected() {
        assert!(matches!(convert_params(0.0, 1.0), Err(Error::Config(_))));
        assert!(matches!(convert_params(1.0, -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn covariance_values() {
        assert_eq!(matern_cov(0.0, 7.0, 0.25), 0.25);
        let r = practical_range(7.0);
        let rho = matern_cov(r, 7.0, 1.0);
        assert!((rho - 0.1399).abs() < 5e-4, "{rho}");
        assert!((matern_cov(r, 7.0, 0.25) - 0.0349).abs() < 1e-4);
    }

    #[test]
    fn monotone() {
        let mut last = f64::INFINITY;
        for i in 0..2000 {
            let c = matern_cov(i as f64 * 1e-3, 7.0, 0.25);
            assert!(c <= last);
            last = c;
        }
    }
}
