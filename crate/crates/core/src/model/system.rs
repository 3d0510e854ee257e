use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::hyper::Hyperparams;
use super::obs::{covariates, ObservationSet, N_COVARIATES};
use crate::error::{Error, Result};
use crate::geometry::{block_projection, point_projection, BlockSet, Mesh, RowMeta, SourceKind};
use crate::gmrf::{ar1_logdet, factorize, kron_precision, precision_ar1, CsrMatrix, SparseSym};
use crate::spde::{fem_matrices, SpdeOperator};

/// Standard deviation of the vague Gaussian prior on `β` and `a`.
pub const FIXED_PRIOR_SD: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Fusion,
    Insitu,
    Satellite,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Insitu, ModelKind::Satellite, ModelKind::Fusion];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Fusion => "fusion",
            ModelKind::Insitu => "insitu",
            ModelKind::Satellite => "satellite",
        }
    }

    pub fn has_bias(self) -> bool {
        self == ModelKind::Fusion
    }

    pub fn uses_satellite(self) -> bool {
        self != ModelKind::Insitu
    }

    pub fn uses_insitu(self) -> bool {
        self != ModelKind::Satellite
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fusion" => Ok(ModelKind::Fusion),
            "insitu" => Ok(ModelKind::Insitu),
            "satellite" => Ok(ModelKind::Satellite),
            _ => Err(Error::config(format!("unknown model kind '{s}'"))),
        }
    }
}

/// Observations stacked against the latent vector `u = (ξ₁, …, ξ_T, β, a)`.
#[derive(Debug, Clone)]
pub struct LinearGaussianSystem {
    kind: ModelKind,
    t_len: usize,
    n_vertices: usize,
    z: Vec<f64>,
    h: CsrMatrix,
    meta: Vec<RowMeta>,
    operator: Arc<SpdeOperator>,
    fixed_prior_sd: f64,
    theta: Hyperparams,
    center: [f64; 2],
}

/// Builds the system for one model kind. Satellite rows come first.
pub fn assemble(
    kind: ModelKind,
    obs: &ObservationSet,
    mesh: &Mesh,
    blocks: &BlockSet,
    theta: Hyperparams,
) -> Result<LinearGaussianSystem> {
    obs.validate()?;
    theta.validate()?;
    let operator = Arc::new(SpdeOperator::new(&fem_matrices(mesh)?));
    let g = mesh.num_vertices();
    let t_len = obs.t_len;
    let n_field = g * t_len;
    let ncols = n_field + N_COVARIATES + usize::from(kind.has_bias());
    let vertex_cov: Vec<[f64; N_COVARIATES]> = mesh
        .vertices()
        .iter()
        .map(|&v| covariates(v, obs.center))
        .collect();

    let mut h = CsrMatrix::new(ncols);
    let mut z = Vec::new();
    let mut meta = Vec::new();
    let mut row = Vec::new();
    let mut push = |spatial: &mut dyn Iterator<Item = (usize, f64)>,
                    t: usize,
                    cov: [f64; N_COVARIATES],
                    bias: bool,
                    m: RowMeta| {
        row.clear();
        row.extend(spatial.map(|(c, v)| (c + (t - 1) * g, v)));
        row.extend(cov.iter().enumerate().map(|(k, &x)| (n_field + k, x)));
        if bias {
            row.push((n_field + N_COVARIATES, 1.0));
        }
        h.push_row(&row);
        meta.push(m);
    };

    if kind.uses_satellite() && !obs.satellite.is_empty() {
        let a = block_projection(mesh, blocks)?;
        let index: HashMap<usize, usize> = blocks
            .ids()
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        for r in &obs.satellite {
            let j = *index.get(&r.block_id).ok_or_else(|| {
                Error::config(format!(
                    "satellite block {} is not in the block set",
                    r.block_id
                ))
            })?;
            let mut cov = [0.0; N_COVARIATES];
            for (c, w) in a.row(j) {
                for k in 0..N_COVARIATES {
                    cov[k] += w * vertex_cov[c][k];
                }
            }
            push(
                &mut a.row(j),
                r.t,
                cov,
                kind.has_bias(),
                RowMeta {
                    t: Some(r.t),
                    kind: SourceKind::Block,
                    source: r.block_id,
                },
            );
            z.push(r.value);
        }
    }
    if kind.uses_insitu() && !obs.insitu.is_empty() {
        let pts: Vec<[f64; 2]> = obs.insitu.iter().map(|r| [r.x, r.y]).collect();
        let a = point_projection(mesh, &pts)?;
        for (i, r) in obs.insitu.iter().enumerate() {
            push(
                &mut a.row(i),
                r.t,
                covariates([r.x, r.y], obs.center),
                false,
                RowMeta {
                    t: Some(r.t),
                    kind: SourceKind::Point,
                    source: r.site_id,
                },
            );
            z.push(r.value);
        }
    }
    if z.is_empty() {
        return Err(Error::config(format!(
            "no observations for the {kind} model"
        )));
    }
    Ok(LinearGaussianSystem {
        kind,
        t_len,
        n_vertices: g,
        z,
        h,
        meta,
        operator,
        fixed_prior_sd: FIXED_PRIOR_SD,
        theta,
        center: obs.center,
    })
}

impl LinearGaussianSystem {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// Length of the `ξ` segment.
    pub fn n_field(&self) -> usize {
        self.n_vertices * self.t_len
    }

    /// Number of fixed effects: `β` and, for the fusion model, `a`.
    pub fn n_fixed(&self) -> usize {
        N_COVARIATES + usize::from(self.kind.has_bias())
    }

    pub fn dim(&self) -> usize {
        self.n_field() + self.n_fixed()
    }

    pub fn bias_index(&self) -> Option<usize> {
        self.kind.has_bias().then(|| self.n_field() + N_COVARIATES)
    }

    pub fn n_obs(&self) -> usize {
        self.z.len()
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn design(&self) -> &CsrMatrix {
        &self.h
    }

    pub fn meta(&self) -> &[RowMeta] {
        &self.meta
    }

    pub fn operator(&self) -> &Arc<SpdeOperator> {
        &self.operator
    }

    pub fn theta(&self) -> Hyperparams {
        self.theta
    }

    /// Point about which the coordinate covariates are demeaned.
    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn fixed_prior_sd(&self) -> f64 {
        self.fixed_prior_sd
    }

    pub fn with_fixed_prior_sd(mut self, sd: f64) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::config(format!(
                "fixed-effect prior sd must be positive, got {sd}"
            )));
        }
        self.fixed_prior_sd = sd;
        Ok(self)
    }

    pub fn with_theta(mut self, theta: Hyperparams) -> Result<Self> {
        theta.validate()?;
        self.theta = theta;
        Ok(self)
    }

    /// Noise precision of each row.
    pub fn noise_precision(&self, theta: &Hyperparams) -> Vec<f64> {
        self.meta
            .iter()
            .map(|m| match m.kind {
                SourceKind::Block => theta.tau1,
                SourceKind::Point => theta.tau2,
            })
            .collect()
    }

    /// `Q_T ⊗ Q_S`, followed by the diagonal fixed-effect prior.
    pub fn prior_precision(&self, theta: &Hyperparams) -> Result<SparseSym> {
        let qs = self.operator.precision(theta.kappa, theta.tau_omega);
        let q = kron_precision(&precision_ar1(theta.rho, self.t_len)?, &qs);
        let prec = 1.0 / (self.fixed_prior_sd * self.fixed_prior_sd);
        let n = q.dim();
        let mut cols: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|j| {
                (q.col_ptr()[j]..q.col_ptr()[j + 1])
                    .map(|p| (q.row_idx()[p], q.values()[p]))
                    .collect()
            })
            .collect();
        cols.extend((0..self.n_fixed()).map(|k| vec![(n + k, prec)]));
        Ok(SparseSym::from_columns(self.dim(), cols))
    }

    /// `log det` of [`prior_precision`](Self::prior_precision).
    pub fn prior_logdet(&self, theta: &Hyperparams) -> Result<f64> {
        let qs = factorize(&self.operator.precision(theta.kappa, theta.tau_omega))?;
        Ok(self.n_vertices as f64 * ar1_logdet(theta.rho, self.t_len)
            + self.t_len as f64 * qs.logdet()
            - 2.0 * self.n_fixed() as f64 * self.fixed_prior_sd.ln())
    }

    /// Latest day carrying an observation.
    pub fn last_observed_day(&self) -> usize {
        self.meta.iter().filter_map(|m| m.t).max().unwrap_or(1)
    }

    /// The same system on days `1..=t_keep`; rows after that day are an error.
    pub fn restrict_days(&self, t_keep: usize) -> Result<Self> {
        if t_keep == 0 || t_keep > self.t_len {
            return Err(Error::config(format!(
                "cannot restrict {} days to {t_keep}",
                self.t_len
            )));
        }
        if self.last_observed_day() > t_keep {
            return Err(Error::config(format!(
                "observations exist after day {t_keep}"
            )));
        }
        let cut = self.n_vertices * t_keep;
        let shift = self.n_field() - cut;
        let mut h = CsrMatrix::new(self.dim() - shift);
        for i in 0..self.h.nrows() {
            let row: Vec<(usize, f64)> = self
                .h
                .row(i)
                .map(|(c, v)| if c < cut { (c, v) } else { (c - shift, v) })
                .collect();
            h.push_row(&row);
        }
        Ok(LinearGaussianSystem {
            t_len: t_keep,
            h,
            ..self.clone()
        })
    }

    /// The system with the listed rows removed.
    pub fn drop_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut drop = vec![false; self.n_obs()];
        for &r in rows {
            if r >= drop.len() {
                return Err(Error::config(format!("row {r} out of range")));
            }
            drop[r] = true;
        }
        let mut h = CsrMatrix::new(self.h.ncols());
        let mut z = Vec::new();
        let mut meta = Vec::new();
        for i in (0..self.n_obs()).filter(|&i| !drop[i]) {
            h.push_row(&self.h.row(i).collect::<Vec<_>>());
            z.push(self.z[i]);
            meta.push(self.meta[i]);
        }
        if z.is_empty() {
            return Err(Error::config("dropping every row leaves no observations"));
        }
        Ok(LinearGaussianSystem {
            z,
            h,
            meta,
            ..self.clone()
        })
    }
}
