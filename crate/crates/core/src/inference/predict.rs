use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::fit::{mixture_quantile, FitResult};
use crate::error::{Error, Result};
use crate::geometry::{block_projection, point_projection, Block, BlockSet, Mesh};
use crate::model::{covariates, Hyperparams, N_COVARIATES};

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSite {
    Point([f64; 2]),
    Block(Block),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Target {
    pub site: TargetSite,
    /// Day, 1-based.
    pub t: usize,
    /// Predict a new measurement rather than the latent surface: adds the
    /// noise of the matching source and, for blocks, the bias.
    pub observation: bool,
}

impl Target {
    pub fn point(p: [f64; 2], t: usize) -> Self {
        Target {
            site: TargetSite::Point(p),
            t,
            observation: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
}

struct Row {
    h: Vec<(usize, f64)>,
    noise: Option<fn(&Hyperparams) -> f64>,
}

fn rows(fit: &FitResult, mesh: &Mesh, targets: &[Target]) -> Result<Vec<Row>> {
    let sys = &fit.system;
    let g = sys.n_vertices();
    if mesh.num_vertices() != g {
        return Err(Error::config(format!(
            "mesh has {} vertices but the fit used {g}",
            mesh.num_vertices()
        )));
    }
    let center = sys.center();
    let n_field = sys.n_field();
    let vertex_cov: Vec<[f64; N_COVARIATES]> = mesh
        .vertices()
        .iter()
        .map(|&v| covariates(v, center))
        .collect();
    let mut out = Vec::with_capacity(targets.len());
    for (i, tg) in targets.iter().enumerate() {
        if tg.t == 0 || tg.t > sys.t_len() {
            return Err(Error::config(format!(
                "target {i}: day {} outside 1..={}",
                tg.t,
                sys.t_len()
            )));
        }
        let shift = (tg.t - 1) * g;
        let mut h: Vec<(usize, f64)>;
        let noise: Option<fn(&Hyperparams) -> f64>;
        match &tg.site {
            TargetSite::Point(p) => {
                let a = point_projection(mesh, &[*p]).map_err(|_| {
                    Error::geometry(format!(
                        "target {i} at ({}, {}) lies outside the mesh",
                        p[0], p[1]
                    ))
                })?;
                h = a.row(0).map(|(c, w)| (c + shift, w)).collect();
                let x = covariates(*p, center);
                h.extend((0..N_COVARIATES).map(|k| (n_field + k, x[k])));
                noise = tg.observation.then_some(|t: &Hyperparams| 1.0 / t.tau2);
            }
            TargetSite::Block(b) => {
                let set = BlockSet::new(vec![b.clone()], vec![0])?;
                let a = block_projection(mesh, &set)?;
                let mut x = [0.0; N_COVARIATES];
                h = Vec::new();
                for (c, w) in a.row(0) {
                    h.push((c + shift, w));
                    for k in 0..N_COVARIATES {
                        x[k] += w * vertex_cov[c][k];
                    }
                }
                h.extend((0..N_COVARIATES).map(|k| (n_field + k, x[k])));
                if tg.observation {
                    if let Some(bias) = sys.bias_index() {
                        h.push((bias, 1.0));
                    }
                }
                noise = tg.observation.then_some(|t: &Hyperparams| 1.0 / t.tau1);
            }
        }
        out.push(Row { h, noise });
    }
    Ok(out)
}

fn dot(h: &[(usize, f64)], u: &[f64]) -> f64 {
    h.iter().map(|&(c, w)| w * u[c]).sum()
}

/// Posterior means only, mixed over the grid.
pub fn predict_mean(fit: &FitResult, mesh: &Mesh, targets: &[Target]) -> Result<Vec<f64>> {
    let rows = rows(fit, mesh, targets)?;
    Ok(rows
        .iter()
        .map(|r| {
            fit.points
                .iter()
                .map(|p| p.weight * dot(&r.h, p.conditional.mean()))
                .sum()
        })
        .collect())
}

/// Gaussian-mixture predictive summaries.
pub fn predict(fit: &FitResult, mesh: &Mesh, targets: &[Target]) -> Result<Vec<Prediction>> {
    let rows = rows(fit, mesh, targets)?;
    let k = fit.points.len();
    let mut means = vec![vec![0.0; k]; rows.len()];
    let mut sds = vec![vec![0.0; k]; rows.len()];
    for (j, p) in fit.points.iter().enumerate() {
        let sel = p.conditional.selected_inverse();
        for (i, r) in rows.iter().enumerate() {
            means[i][j] = dot(&r.h, p.conditional.mean());
            let mut var = p.conditional.linear_variance(&sel, &r.h);
            if let Some(f) = r.noise {
                var += f(&p.theta);
            }
            sds[i][j] = var.max(0.0).sqrt();
        }
    }
    let w: Vec<f64> = fit.points.iter().map(|p| p.weight).collect();
    Ok((0..rows.len())
        .map(|i| {
            let mean: f64 = w.iter().zip(&means[i]).map(|(a, b)| a * b).sum();
            let second: f64 = w
                .iter()
                .zip(means[i].iter().zip(&sds[i]))
                .map(|(a, (m, s))| a * (m * m + s * s))
                .sum();
            Prediction {
                mean,
                sd: (second - mean * mean).max(0.0).sqrt(),
                q025: mixture_quantile(&w, &means[i], &sds[i], 0.025),
                q975: mixture_quantile(&w, &means[i], &sds[i], 0.975),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub theta: Vec<Hyperparams>,
    /// `(β₀, β₁, β₂[, a])` per draw.
    pub fixed: Vec<Vec<f64>>,
    pub field: Option<Vec<Vec<f64>>>,
}

/// Draws a grid point by weight, then the latent vector from its Gaussian.
pub fn sample_posterior(
    fit: &FitResult,
    n_samp: usize,
    seed: u64,
    with_field: bool,
) -> Result<PosteriorSamples> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = fit.points.iter().map(|p| p.weight).collect();
    let pick = WeightedIndex::new(&w)
        .map_err(|e| Error::numerical(format!("invalid grid weights: {e}")))?;
    let n_field = fit.system.n_field();
    let mut out = PosteriorSamples {
        theta: Vec::with_capacity(n_samp),
        fixed: Vec::with_capacity(n_samp),
        field: with_field.then(Vec::new),
    };
    for _ in 0..n_samp {
        let p = &fit.points[pick.sample(&mut rng)];
        let u = p.conditional.sample_with(&mut rng);
        out.theta.push(p.theta);
        out.fixed.push(u[n_field..].to_vec());
        if let Some(f) = out.field.as_mut() {
            f.push(u[..n_field].to_vec());
        }
    }
    Ok(out)
}
