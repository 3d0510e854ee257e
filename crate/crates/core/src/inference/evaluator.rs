//! Repeated posterior evaluation for one system on a fixed sparsity pattern.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::Result;
use crate::geometry::SourceKind;
use crate::gmrf::{ar1_logdet, CholeskyFactor, GaussianConditional, SparseSym, SymbolicCholesky};
use crate::model::{Hyperparams, LinearGaussianSystem};

#[derive(Clone, Copy)]
enum Coef {
    /// First or last day on the diagonal.
    End,
    /// Interior day on the diagonal, `1 + ρ²`.
    Mid,
    /// Neighbouring days, `−ρ`.
    Off,
}

/// Caches the union pattern of prior and data precision, its symbolic
/// factorization and the data terms, so each evaluation is a linear
/// combination followed by a numeric factorization.
pub struct Evaluator {
    n_field: usize,
    t_len: usize,
    n_vertices: usize,
    pattern: SparseSym,
    symbolic: Arc<SymbolicCholesky>,
    xi_slots: Vec<(usize, usize, Coef)>,
    fixed_slots: Vec<usize>,
    fixed_prec: f64,
    gram: [Vec<f64>; 2],
    rhs: [Vec<f64>; 2],
    zz: [f64; 2],
    counts: [usize; 2],
    spatial: SparseSym,
    spatial_symbolic: Arc<SymbolicCholesky>,
    system: LinearGaussianSystem,
}

/// Result of one evaluation.
pub struct Evaluation {
    pub log_marginal: f64,
    pub conditional: GaussianConditional,
}

fn slot(pattern: &SparseSym, r: usize, c: usize) -> usize {
    let (lo, hi) = (pattern.col_ptr()[c], pattern.col_ptr()[c + 1]);
    lo + pattern.row_idx()[lo..hi]
        .binary_search(&r)
        .expect("entry outside the union pattern")
}

fn source_index(kind: SourceKind) -> usize {
    match kind {
        SourceKind::Block => 0,
        SourceKind::Point => 1,
    }
}

impl Evaluator {
    pub fn new(system: &LinearGaussianSystem) -> Result<Self> {
        let g = system.n_vertices();
        let t_len = system.t_len();
        let n_field = system.n_field();
        let n = system.dim();
        let spatial = system.operator().pattern().clone();
        let h = system.design();

        let weights: [Vec<f64>; 2] = [0, 1].map(|k| {
            system
                .meta()
                .iter()
                .map(|m| if source_index(m.kind) == k { 1.0 } else { 0.0 })
                .collect()
        });
        let grams = weights.clone().map(|w| h.weighted_gram(&w));

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for t in 0..t_len {
            for (i, j, _) in spatial.iter() {
                cols[t * g + j].push((t * g + i, 0.0));
                if t + 1 < t_len {
                    cols[t * g + j].push(((t + 1) * g + i, 0.0));
                    cols[t * g + i].push(((t + 1) * g + j, 0.0));
                }
            }
        }
        for gm in &grams {
            for (r, c, _) in gm.iter() {
                cols[c].push((r, 0.0));
            }
        }
        let pattern = SparseSym::from_columns(n, cols);

        let mut xi_slots = Vec::with_capacity(spatial.stored_nnz() * (3 * t_len));
        for t in 0..t_len {
            let diag = if t == 0 || t + 1 == t_len {
                Coef::End
            } else {
                Coef::Mid
            };
            for p in 0..spatial.dim() {
                for q in spatial.col_ptr()[p]..spatial.col_ptr()[p + 1] {
                    let i = spatial.row_idx()[q];
                    xi_slots.push((slot(&pattern, t * g + i, t * g + p), q, diag));
                    if t + 1 < t_len {
                        xi_slots.push((slot(&pattern, (t + 1) * g + i, t * g + p), q, Coef::Off));
                        if i != p {
                            xi_slots.push((
                                slot(&pattern, (t + 1) * g + p, t * g + i),
                                q,
                                Coef::Off,
                            ));
                        }
                    }
                }
            }
        }
        let fixed_slots = (n_field..n).map(|k| slot(&pattern, k, k)).collect();
        let gram = grams.clone().map(|gm| {
            let mut v = vec![0.0; pattern.stored_nnz()];
            for (r, c, x) in gm.iter() {
                v[slot(&pattern, r, c)] += x;
            }
            v
        });
        let z = system.z();
        let rhs = weights.clone().map(|w| {
            let wz: Vec<f64> = z.iter().zip(&w).map(|(a, b)| a * b).collect();
            h.tr_mul_vec(&wz)
        });
        let zz = weights
            .clone()
            .map(|w| z.iter().zip(&w).map(|(a, b)| a * a * b).sum());
        let counts = weights.map(|w| w.iter().filter(|&&x| x > 0.0).count());
        let symbolic = SymbolicCholesky::analyze(&pattern);
        let spatial_symbolic = SymbolicCholesky::analyze(&spatial);
        let sd = system.fixed_prior_sd();
        Ok(Evaluator {
            n_field,
            t_len,
            n_vertices: g,
            pattern,
            symbolic,
            xi_slots,
            fixed_slots,
            fixed_prec: 1.0 / (sd * sd),
            gram,
            rhs,
            zz,
            counts,
            spatial,
            spatial_symbolic,
            system: system.clone(),
        })
    }

    pub fn system(&self) -> &LinearGaussianSystem {
        &self.system
    }

    pub fn symbolic(&self) -> &Arc<SymbolicCholesky> {
        &self.symbolic
    }

    fn prior_values(&self, theta: &Hyperparams) -> Vec<f64> {
        let qs = self.system.operator().values(theta.kappa, theta.tau_omega);
        let rho = theta.rho;
        let coef = |c: Coef| match c {
            Coef::End => 1.0,
            Coef::Mid => 1.0 + rho * rho,
            Coef::Off => -rho,
        };
        let mut v = vec![0.0; self.pattern.stored_nnz()];
        for &(s, q, c) in &self.xi_slots {
            v[s] = coef(c) * qs[q];
        }
        for &s in &self.fixed_slots {
            v[s] += self.fixed_prec;
        }
        v
    }

    pub fn prior_precision(&self, theta: &Hyperparams) -> SparseSym {
        self.pattern.with_values(self.prior_values(theta))
    }

    pub fn posterior_precision(&self, theta: &Hyperparams) -> SparseSym {
        let mut v = self.prior_values(theta);
        let tau = [theta.tau1, theta.tau2];
        for k in 0..2 {
            if self.counts[k] > 0 {
                for (x, g) in v.iter_mut().zip(&self.gram[k]) {
                    *x += tau[k] * g;
                }
            }
        }
        self.pattern.with_values(v)
    }

    pub fn prior_logdet(&self, theta: &Hyperparams) -> Result<f64> {
        let qs = self
            .spatial
            .with_values(self.system.operator().values(theta.kappa, theta.tau_omega));
        let f = self.spatial_symbolic.factor(&qs)?;
        let n_fixed = self.system.dim() - self.n_field;
        Ok(self.n_vertices as f64 * ar1_logdet(theta.rho, self.t_len)
            + self.t_len as f64 * f.logdet()
            + n_fixed as f64 * self.fixed_prec.ln())
    }

    pub fn factor(&self, theta: &Hyperparams) -> Result<CholeskyFactor> {
        self.symbolic.factor(&self.posterior_precision(theta))
    }

    /// Exact log marginal likelihood and the latent posterior.
    pub fn evaluate(&self, theta: &Hyperparams) -> Result<Evaluation> {
        let factor = self.factor(theta)?;
        let tau = [theta.tau1, theta.tau2];
        let b: Vec<f64> = (0..self.system.dim())
            .map(|i| tau[0] * self.rhs[0][i] + tau[1] * self.rhs[1][i])
            .collect();
        let mean = factor.solve(&b);
        let bm: f64 = b.iter().zip(&mean).map(|(x, y)| x * y).sum();
        let quad = tau[0] * self.zz[0] + tau[1] * self.zz[1] - bm;
        let n = (self.counts[0] + self.counts[1]) as f64;
        let log_marginal = -0.5 * n * (2.0 * PI).ln()
            + 0.5 * (self.counts[0] as f64 * tau[0].ln() + self.counts[1] as f64 * tau[1].ln())
            + 0.5 * self.prior_logdet(theta)?
            - 0.5 * factor.logdet()
            - 0.5 * quad;
        Ok(Evaluation {
            log_marginal,
            conditional: GaussianConditional::new(mean, factor),
        })
    }
}
