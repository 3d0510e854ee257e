use log::{debug, info};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::evaluator::Evaluator;
use super::nelder_mead::NelderMead;
use super::prior::PriorSpec;
use crate::error::{Error, Result};
use crate::gmrf::GaussianConditional;
use crate::model::{Hyperparams, LinearGaussianSystem, ModelKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridStrategy {
    /// Centre plus two axial points per hyperparameter.
    Ccd,
    /// The mode alone (empirical Bayes).
    Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub max_evals: usize,
    pub tol: f64,
    pub restarts: usize,
    pub initial_step: f64,
    /// Starting point on the transformed scale.
    pub init: [f64; 5],
    /// Step of the finite-difference Hessian.
    pub fd_step: f64,
    pub grid: GridStrategy,
    /// Axial distance in posterior standard deviations.
    pub axial_scale: f64,
    /// Drop trailing days without data from the objective; the latent
    /// marginal over the remaining days is unchanged.
    pub trim_unobserved_days: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_evals: 1000,
            tol: 1e-4,
            restarts: 3,
            initial_step: 1.0,
            init: [0.0, 0.0, 0.0, 4.0, 4.0],
            fd_step: 0.02,
            grid: GridStrategy::Ccd,
            axial_scale: 1.0,
            trim_unobserved_days: true,
        }
    }
}

pub const THETA_NAMES: [&str; 5] = ["tau_omega", "kappa", "rho", "tau1", "tau2"];

#[derive(Debug, Clone)]
pub struct GridPoint {
    pub theta: Hyperparams,
    pub log_posterior: f64,
    pub weight: f64,
    pub conditional: GaussianConditional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub system: LinearGaussianSystem,
    pub points: Vec<GridPoint>,
    /// Index of the grid point with the largest log posterior.
    pub mode: usize,
    pub start_log_posterior: f64,
    /// Log posterior of every optimizer evaluation.
    pub trace: Vec<f64>,
    pub active: [bool; 5],
    pub summaries: Vec<ParamSummary>,
}

impl FitResult {
    pub fn kind(&self) -> ModelKind {
        self.system.kind()
    }

    pub fn mode_theta(&self) -> Hyperparams {
        self.points[self.mode].theta
    }

    pub fn summary(&self, name: &str) -> Option<&ParamSummary> {
        self.summaries.iter().find(|s| s.name == name)
    }

    /// Names of the fixed effects, in latent order after `ξ`.
    pub fn fixed_names(&self) -> Vec<&'static str> {
        let mut v = vec!["beta0", "beta1", "beta2"];
        if self.kind().has_bias() {
            v.push("a");
        }
        v
    }
}

/// Hyperparameters that enter the likelihood of each model.
pub fn active_hyperparams(kind: ModelKind) -> [bool; 5] {
    [true, true, true, kind.uses_satellite(), kind.uses_insitu()]
}

/// Exact `log p(z | Θ)`.
pub fn log_marginal_likelihood(theta: &Hyperparams, system: &LinearGaussianSystem) -> Result<f64> {
    Ok(Evaluator::new(system)?.evaluate(theta)?.log_marginal)
}

/// `u | z, Θ`.
pub fn latent_posterior(
    system: &LinearGaussianSystem,
    theta: &Hyperparams,
) -> Result<GaussianConditional> {
    Ok(Evaluator::new(system)?.evaluate(theta)?.conditional)
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Quantile of `Σ w_k N(m_k, s_k²)` by bisection to 1e-6.
pub fn mixture_quantile(weights: &[f64], means: &[f64], sds: &[f64], q: f64) -> f64 {
    let cdf = |x: f64| -> f64 {
        weights
            .iter()
            .zip(means.iter().zip(sds))
            .map(|(w, (m, s))| {
                if *s > 0.0 {
                    w * normal_cdf((x - m) / s)
                } else if x >= *m {
                    *w
                } else {
                    0.0
                }
            })
            .sum()
    };
    let spread = sds.iter().cloned().fold(0.0, f64::max);
    let mut lo = means.iter().cloned().fold(f64::INFINITY, f64::min) - 10.0 * spread - 1e-6;
    let mut hi = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 10.0 * spread + 1e-6;
    while hi - lo > 1e-6 * (1.0 + lo.abs().min(hi.abs())) {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn discrete_summary(name: &str, weights: &[f64], values: &[f64]) -> ParamSummary {
    let mean: f64 = weights.iter().zip(values).map(|(w, v)| w * v).sum();
    let var: f64 = weights
        .iter()
        .zip(values)
        .map(|(w, v)| w * (v - mean) * (v - mean))
        .sum();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let quantile = |q: f64| {
        let mut acc = 0.0;
        for &i in &order {
            acc += weights[i];
            if acc >= q - 1e-12 {
                return values[i];
            }
        }
        values[*order.last().unwrap()]
    };
    ParamSummary {
        name: name.to_string(),
        mean,
        sd: var.max(0.0).sqrt(),
        q025: quantile(0.025),
        q975: quantile(0.975),
    }
}

fn summarize(
    system: &LinearGaussianSystem,
    points: &[GridPoint],
    active: &[bool; 5],
) -> Vec<ParamSummary> {
    let w: Vec<f64> = points.iter().map(|p| p.weight).collect();
    let mut out = Vec::new();
    let mut names = vec!["beta0", "beta1", "beta2"];
    if system.kind().has_bias() {
        names.push("a");
    }
    for (k, name) in names.iter().enumerate() {
        let idx = system.n_field() + k;
        let e = [(idx, 1.0)];
        let means: Vec<f64> = points.iter().map(|p| p.conditional.mean()[idx]).collect();
        let sds: Vec<f64> = points
            .iter()
            .map(|p| p.conditional.linear_variance_by_solve(&e).sqrt())
            .collect();
        let mean: f64 = w.iter().zip(&means).map(|(a, b)| a * b).sum();
        let second: f64 = w
            .iter()
            .zip(means.iter().zip(&sds))
            .map(|(a, (m, s))| a * (s * s + m * m))
            .sum();
        out.push(ParamSummary {
            name: name.to_string(),
            mean,
            sd: (second - mean * mean).max(0.0).sqrt(),
            q025: mixture_quantile(&w, &means, &sds, 0.025),
            q975: mixture_quantile(&w, &means, &sds, 0.975),
        });
    }
    let hyper: [fn(&Hyperparams) -> f64; 5] = [
        |h| h.tau_omega,
        |h| h.kappa,
        |h| h.rho,
        |h| h.tau1,
        |h| h.tau2,
    ];
    for (k, get) in hyper.iter().enumerate() {
        if active[k] {
            let v: Vec<f64> = points.iter().map(|p| get(&p.theta)).collect();
            out.push(discrete_summary(THETA_NAMES[k], &w, &v));
        }
    }
    let v: Vec<f64> = points.iter().map(|p| p.theta.sigma2()).collect();
    out.push(discrete_summary("sigma2_omega", &w, &v));
    let v: Vec<f64> = points.iter().map(|p| p.theta.range()).collect();
    out.push(discrete_summary("range", &w, &v));
    out
}

fn expand(active: &[bool; 5], base: &[f64; 5], x: &[f64]) -> [f64; 5] {
    let mut theta = *base;
    let mut it = x.iter();
    for k in 0..5 {
        if active[k] {
            theta[k] = *it.next().expect("one value per active entry");
        }
    }
    theta
}

// Transformed values beyond this are treated as outside the support.
const THETA_BOUND: f64 = 25.0;

fn log_posterior(ev: &Evaluator, priors: &PriorSpec, active: &[bool; 5], theta: &[f64; 5]) -> f64 {
    if theta.iter().any(|t| !(t.abs() < THETA_BOUND)) {
        return f64::NEG_INFINITY;
    }
    match ev.evaluate(&Hyperparams::from_theta(theta)) {
        Ok(e) => e.log_marginal + priors.log_density(theta, active),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Central finite-difference Hessian of `f` at `x`.
fn hessian<F: Fn(&[f64]) -> f64 + Sync>(f: &F, x: &[f64], fx: f64, h: f64) -> DMatrix<f64> {
    let d = x.len();
    let shifted = |steps: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, s) in steps {
            y[i] += s;
        }
        f(&y)
    };
    let mut jobs: Vec<(usize, usize)> = Vec::new();
    for i in 0..d {
        for j in 0..=i {
            jobs.push((i, j));
        }
    }
    let vals: Vec<f64> = jobs
        .par_iter()
        .map(|&(i, j)| {
            if i == j {
                (shifted(&[(i, h)]) - 2.0 * fx + shifted(&[(i, -h)])) / (h * h)
            } else {
                (shifted(&[(i, h), (j, h)])
                    - shifted(&[(i, h), (j, -h)])
                    - shifted(&[(i, -h), (j, h)])
                    + shifted(&[(i, -h), (j, -h)]))
                    / (4.0 * h * h)
            }
        })
        .collect();
    let mut m = DMatrix::zeros(d, d);
    for (&(i, j), v) in jobs.iter().zip(vals) {
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    m
}

/// Posterior mode by simplex search, then a central-composite grid scaled
/// by the curvature at the mode, with a latent Gaussian at every point.
pub fn fit(
    system: &LinearGaussianSystem,
    priors: &PriorSpec,
    opt: &OptimizerConfig,
) -> Result<FitResult> {
    priors.validate()?;
    let system = system.clone().with_fixed_prior_sd(priors.fixed_sd)?;
    let kind = system.kind();
    let active = active_hyperparams(kind);
    let objective_sys = if opt.trim_unobserved_days {
        system.restrict_days(system.last_observed_day())?
    } else {
        system.clone()
    };
    let ev = Evaluator::new(&objective_sys)?;
    debug!(
        "{kind}: objective dimension {}, factor nnz {}",
        objective_sys.dim(),
        ev.symbolic().nnz_l()
    );
    let lp = |x: &[f64]| log_posterior(&ev, priors, &active, &expand(&active, &opt.init, x));
    let x0: Vec<f64> = (0..5).filter(|&k| active[k]).map(|k| opt.init[k]).collect();
    let start_log_posterior = lp(&x0);

    let nm = NelderMead {
        max_evals: opt.max_evals,
        tol: opt.tol,
        restarts: opt.restarts,
        step: opt.initial_step,
    };
    let found = nm.minimize(|x| -lp(x), &x0);
    let trace: Vec<f64> = found.trace.iter().map(|v| -v).collect();
    if !found.converged || !found.fx.is_finite() {
        return Err(Error::Fit {
            message: format!("{kind} model: simplex search did not converge"),
            trace,
        });
    }
    info!(
        "{kind}: mode log posterior {:.4} after {} evaluations",
        -found.fx,
        trace.len()
    );

    let mode_x = found.x.clone();
    let mut design: Vec<Vec<f64>> = vec![mode_x.clone()];
    if opt.grid == GridStrategy::Ccd {
        let hess = -hessian(&lp, &mode_x, -found.fx, opt.fd_step);
        let eig = SymmetricEigen::new(hess);
        for k in 0..mode_x.len() {
            let lambda = eig.eigenvalues[k];
            if !(lambda.is_finite() && lambda > 1e-8) {
                continue;
            }
            let step = opt.axial_scale / lambda.sqrt();
            for sign in [-1.0, 1.0] {
                let x: Vec<f64> = (0..mode_x.len())
                    .map(|i| mode_x[i] + sign * step * eig.eigenvectors[(i, k)])
                    .collect();
                design.push(x);
            }
        }
    }
    let full = if opt.trim_unobserved_days && objective_sys.t_len() != system.t_len() {
        Some(Evaluator::new(&system)?)
    } else {
        None
    };
    let full_ev = full.as_ref().unwrap_or(&ev);
    let evaluated: Vec<(Hyperparams, f64, GaussianConditional)> = design
        .par_iter()
        .enumerate()
        .filter_map(|(i, x)| {
            let theta = expand(&active, &opt.init, x);
            let h = Hyperparams::from_theta(&theta);
            let lpost = if i == 0 { -found.fx } else { lp(x) };
            if !lpost.is_finite() {
                return None;
            }
            full_ev.evaluate(&h).ok().map(|e| (h, lpost, e.conditional))
        })
        .collect();
    if evaluated.is_empty() {
        return Err(Error::Fit {
            message: format!("{kind} model: latent posterior failed at the mode"),
            trace,
        });
    }
    Ok(assemble_result(
        system,
        evaluated,
        start_log_posterior,
        trace,
    ))
}

fn assemble_result(
    system: LinearGaussianSystem,
    mut evaluated: Vec<(Hyperparams, f64, GaussianConditional)>,
    start_log_posterior: f64,
    trace: Vec<f64>,
) -> FitResult {
    let active = active_hyperparams(system.kind());
    let best = evaluated
        .iter()
        .map(|e| e.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = evaluated.iter().map(|e| (e.1 - best).exp()).sum();
    let points: Vec<GridPoint> = evaluated
        .drain(..)
        .map(|(theta, log_posterior, conditional)| GridPoint {
            theta,
            log_posterior,
            weight: (log_posterior - best).exp() / total,
            conditional,
        })
        .collect();
    let mode = (0..points.len())
        .max_by(|&a, &b| points[a].log_posterior.total_cmp(&points[b].log_posterior))
        .unwrap();
    let summaries = summarize(&system, &points, &active);
    FitResult {
        system,
        points,
        mode,
        start_log_posterior,
        trace,
        active,
        summaries,
    }
}

/// Rebuilds a fit from stored grid points `(Θ, log posterior)` without
/// repeating the mode search.
pub fn fit_from_grid(
    system: &LinearGaussianSystem,
    priors: &PriorSpec,
    grid: &[(Hyperparams, f64)],
    start_log_posterior: f64,
) -> Result<FitResult> {
    priors.validate()?;
    if grid.is_empty() || grid.iter().any(|g| !g.1.is_finite()) {
        return Err(Error::config(
            "stored fit needs at least one grid point with a finite log posterior",
        ));
    }
    for (h, _) in grid {
        h.validate()?;
    }
    let system = system.clone().with_fixed_prior_sd(priors.fixed_sd)?;
    let ev = Evaluator::new(&system)?;
    let evaluated = grid
        .par_iter()
        .map(|&(h, lp)| Ok((h, lp, ev.evaluate(&h)?.conditional)))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_result(
        system,
        evaluated,
        start_log_posterior,
        Vec::new(),
    ))
}
