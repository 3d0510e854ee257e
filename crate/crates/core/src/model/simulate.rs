use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::hyper::Hyperparams;
use super::obs::{covariates, InsituObs, ObservationSet, SatelliteObs, N_COVARIATES};
use crate::error::{Error, Result};
use crate::geometry::{
    block_projection, build_mesh, point_projection, BlockSet, GridSpec, Mesh, Polygon,
};
use crate::gmrf::factorize;
use crate::spde::{fem_matrices, SpdeOperator};

/// One simulation scenario. Defaults follow scenario 10 at desk scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub id: usize,
    /// In situ sites, fixed over days.
    pub n_insitu: usize,
    /// Fraction of block-days removed.
    pub missing_pct: f64,
    /// Inner edge of the mesh the models are fitted on.
    pub max_edge_inner: f64,
    pub max_edge_outer: f64,
    pub outer_pad: f64,
    /// Inner edge of the mesh the data are generated on.
    pub sim_max_edge: f64,
    /// Side of a square satellite pixel.
    pub block_cell: f64,
    pub t_len: usize,
    pub train_days: usize,
    pub n_sim: usize,
    pub n_samp: usize,
    pub n_pred: usize,
    pub truth: Hyperparams,
    /// `(β₀, β₁, β₂)` for intercept, demeaned x and demeaned y.
    pub beta: [f64; N_COVARIATES],
    pub a: f64,
    /// Generate observations without measurement error.
    pub noise_free: bool,
    /// Domain ring; the built-in western basin outline when absent.
    pub domain: Option<Vec<[f64; 2]>>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::table1(10).expect("scenario 10 exists")
    }
}

impl ScenarioConfig {
    /// Scenario `id` (1–12) of the study design.
    pub fn table1(id: usize) -> Result<Self> {
        if !(1..=12).contains(&id) {
            return Err(Error::config(format!(
                "scenario id must be in 1..=12, got {id}"
            )));
        }
        let k = id - 1;
        let n_insitu = if k % 2 == 0 { 5 } else { 30 };
        let missing_pct = if (k / 2) % 2 == 0 { 0.5 } else { 0.8 };
        let max_edge_inner = [0.15, 0.1, 0.05][k / 4];
        Ok(ScenarioConfig {
            id,
            n_insitu,
            missing_pct,
            max_edge_inner,
            max_edge_outer: 0.2,
            outer_pad: 0.2,
            sim_max_edge: 0.05,
            block_cell: 0.1,
            t_len: 19,
            train_days: 14,
            n_sim: 20,
            n_samp: 100,
            n_pred: 20,
            truth: Hyperparams::simulation_truth(),
            beta: [0.0, -1.0, -1.0],
            a: 0.5,
            noise_free: false,
            domain: None,
            seed: 1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.truth.validate()?;
        if self.n_insitu == 0 {
            return Err(Error::config("n_insitu must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.missing_pct) {
            return Err(Error::config(format!(
                "missing_pct must be in [0, 1), got {}",
                self.missing_pct
            )));
        }
        if self.train_days == 0 || self.train_days >= self.t_len {
            return Err(Error::config(format!(
                "train_days must be in 1..{}, got {}",
                self.t_len, self.train_days
            )));
        }
        if !(self.block_cell > 0.0 && self.sim_max_edge > 0.0) {
            return Err(Error::config(
                "block_cell and sim_max_edge must be positive",
            ));
        }
        if self.n_samp == 0 || self.n_pred == 0 {
            return Err(Error::config("n_samp and n_pred must be positive"));
        }
        Ok(())
    }

    pub fn domain_polygon(&self) -> Result<Polygon> {
        match &self.domain {
            Some(ring) => Polygon::new(ring.clone()),
            None => Ok(Polygon::western_basin()),
        }
    }

    pub fn fit_mesh(&self) -> Result<Mesh> {
        build_mesh(
            &self.domain_polygon()?,
            self.max_edge_inner,
            self.outer_pad,
            self.max_edge_outer.max(self.max_edge_inner),
        )
    }

    pub fn sim_mesh(&self) -> Result<Mesh> {
        build_mesh(
            &self.domain_polygon()?,
            self.sim_max_edge,
            self.outer_pad,
            self.max_edge_outer.max(self.sim_max_edge),
        )
    }

    pub fn grid(&self) -> Result<GridSpec> {
        Ok(GridSpec::covering(&self.domain_polygon()?, self.block_cell))
    }

    /// Pixels whose centre lies in the domain.
    pub fn blocks(&self) -> Result<BlockSet> {
        BlockSet::from_grid_within(&self.grid()?, &self.domain_polygon()?)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ScenarioConfig {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub mesh: Mesh,
    /// Latent surface `y = xβ + ξ` at the simulation-mesh vertices, per day.
    pub field: Vec<Vec<f64>>,
    pub obs: ObservationSet,
    pub grid: GridSpec,
    pub blocks: BlockSet,
    /// Held-out locations, disjoint from the in situ sites.
    pub holdout: Vec<[f64; 2]>,
    /// `holdout_truth[t][l]` is `y(s_l, t + 1)`.
    pub holdout_truth: Vec<Vec<f64>>,
}

fn uniform_in(domain: &Polygon, rng: &mut ChaCha8Rng) -> [f64; 2] {
    let b = domain.bbox();
    loop {
        let p = [rng.random_range(b[0]..b[2]), rng.random_range(b[1]..b[3])];
        if domain.contains(p) {
            return p;
        }
    }
}

fn dot(a: &[f64; N_COVARIATES], b: &[f64; N_COVARIATES]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Draws one replication: AR(1) latent field, in situ and satellite data,
/// and held-out truth. Deterministic given `cfg.seed`.
pub fn simulate_scenario(cfg: &ScenarioConfig) -> Result<SimulatedData> {
    cfg.validate()?;
    let domain = cfg.domain_polygon()?;
    let mesh = cfg.sim_mesh()?;
    let grid = cfg.grid()?;
    let blocks = cfg.blocks()?;
    let center = domain.centroid();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let sites: Vec<[f64; 2]> = (0..cfg.n_insitu)
        .map(|_| uniform_in(&domain, &mut rng))
        .collect();

    let th = cfg.truth;
    let qs = SpdeOperator::new(&fem_matrices(&mesh)?).precision(th.kappa, th.tau_omega);
    let chol = factorize(&qs)?;
    let g = mesh.num_vertices();
    let trend: Vec<f64> = mesh
        .vertices()
        .iter()
        .map(|&v| dot(&covariates(v, center), &cfg.beta))
        .collect();
    let mut xi = vec![0.0; g];
    let mut field = Vec::with_capacity(cfg.t_len);
    for t in 0..cfg.t_len {
        let z: Vec<f64> = (0..g).map(|_| rng.sample(StandardNormal)).collect();
        let omega = chol.transform_standard_normal(&z);
        if t == 0 {
            let s = 1.0 / (1.0 - th.rho * th.rho).sqrt();
            xi = omega.iter().map(|w| s * w).collect();
        } else {
            xi = xi.iter().zip(&omega).map(|(x, w)| th.rho * x + w).collect();
        }
        field.push(
            xi.iter()
                .zip(&trend)
                .map(|(x, m)| x + m)
                .collect::<Vec<f64>>(),
        );
    }

    let noise = |rng: &mut ChaCha8Rng, tau: f64| -> f64 {
        let e: f64 = rng.sample(StandardNormal);
        if cfg.noise_free {
            0.0
        } else {
            e / tau.sqrt()
        }
    };

    let a_pt = point_projection(&mesh, &sites)?;
    let a_blk = block_projection(&mesh, &blocks)?;
    let mut insitu = Vec::with_capacity(cfg.n_insitu * cfg.t_len);
    let mut satellite = Vec::new();
    for (t, y) in field.iter().enumerate() {
        let at_sites = a_pt.matrix().mul_vec(y);
        for (i, &p) in sites.iter().enumerate() {
            insitu.push(InsituObs {
                site_id: i,
                x: p[0],
                y: p[1],
                t: t + 1,
                value: at_sites[i] + noise(&mut rng, th.tau2),
            });
        }
        let avg = a_blk.matrix().mul_vec(y);
        for (j, &id) in blocks.ids().iter().enumerate() {
            let keep = rng.random::<f64>() >= cfg.missing_pct;
            let e = noise(&mut rng, th.tau1);
            if keep {
                satellite.push(SatelliteObs {
                    block_id: id,
                    t: t + 1,
                    value: cfg.a + avg[j] + e,
                });
            }
        }
    }

    let mut holdout = Vec::with_capacity(cfg.n_pred);
    while holdout.len() < cfg.n_pred {
        let p = uniform_in(&domain, &mut rng);
        if !sites.contains(&p) {
            holdout.push(p);
        }
    }
    let a_ho = point_projection(&mesh, &holdout)?;
    let holdout_truth = field.iter().map(|y| a_ho.matrix().mul_vec(y)).collect();

    Ok(SimulatedData {
        mesh,
        field,
        obs: ObservationSet::new(cfg.t_len, insitu, satellite, center)?,
        grid,
        blocks,
        holdout,
        holdout_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            sim_max_edge: 0.1,
            ..ScenarioConfig::table1(2).unwrap()
        }
    }

    #[test]
    fn table_levels() {
        let s: Vec<(usize, f64, f64)> = (1..=12)
            .map(|i| {
                let c = ScenarioConfig::table1(i).unwrap();
                (c.n_insitu, c.missing_pct, c.max_edge_inner)
            })
            .collect();
        assert_eq!(s[0], (5, 0.5, 0.15));
        assert_eq!(s[1], (30, 0.5, 0.15));
        assert_eq!(s[3], (30, 0.8, 0.15));
        assert_eq!(s[6], (5, 0.8, 0.1));
        assert_eq!(s[9], (30, 0.5, 0.05));
        assert_eq!(s[10], (5, 0.8, 0.05));
        assert!(ScenarioConfig::table1(13).is_err());
    }

    #[test]
    fn scenario_two_counts() {
        let cfg = small();
        let d = simulate_scenario(&cfg).unwrap();
        assert_eq!(d.obs.insitu.len(), 30 * 19);
        let cells = d.blocks.len() * 19;
        let frac = d.obs.satellite.len() as f64 / cells as f64;
        assert!((frac - 0.5).abs() < 0.1, "{frac}");
        let days: Vec<usize> = d.obs.insitu.iter().map(|r| r.t).collect();
        assert_eq!(*days.iter().max().unwrap(), 19);
        // sites fixed over days
        for r in &d.obs.insitu {
            let first = d.obs.insitu[r.site_id];
            assert_eq!((r.x, r.y), (first.x, first.y));
        }
        for p in &d.holdout {
            assert!(!d.obs.sites().iter().any(|s| s.1 == *p));
        }
    }

    #[test]
    fn deterministic() {
        let a = simulate_scenario(&small()).unwrap();
        let b = simulate_scenario(&small()).unwrap();
        assert_eq!(a.obs, b.obs);
        assert_eq!(a.holdout_truth, b.holdout_truth);
        let c = simulate_scenario(&small().with_seed(2)).unwrap();
        assert_ne!(a.obs, c.obs);
    }

    #[test]
    fn noise_free_is_exact() {
        let cfg = ScenarioConfig {
            noise_free: true,
            ..small()
        };
        let d = simulate_scenario(&cfg).unwrap();
        let a_blk = block_projection(&d.mesh, &d.blocks).unwrap();
        for r in &d.obs.satellite {
            let j = d.blocks.index_of(r.block_id).unwrap();
            let avg: f64 = a_blk.row(j).map(|(c, w)| w * d.field[r.t - 1][c]).sum();
            assert!((r.value - cfg.a - avg).abs() < 1e-12);
        }
        let pts: Vec<[f64; 2]> = d.obs.insitu.iter().map(|r| [r.x, r.y]).collect();
        let a_pt = point_projection(&d.mesh, &pts).unwrap();
        for (i, r) in d.obs.insitu.iter().enumerate() {
            let y: f64 = a_pt.row(i).map(|(c, w)| w * d.field[r.t - 1][c]).sum();
            assert!((r.value - y).abs() < 1e-12);
        }
    }

    #[test]
    fn residuals_match_noise_model() {
        let cfg = small();
        let d = simulate_scenario(&cfg).unwrap();
        let a_blk = block_projection(&d.mesh, &d.blocks).unwrap();
        let res: Vec<f64> = d
            .obs
            .satellite
            .iter()
            .map(|r| {
                let j = d.blocks.index_of(r.block_id).unwrap();
                r.value
                    - a_blk
                        .row(j)
                        .map(|(c, w)| w * d.field[r.t - 1][c])
                        .sum::<f64>()
            })
            .collect();
        let n = res.len() as f64;
        let mean = res.iter().sum::<f64>() / n;
        let se = (1.0 / cfg.truth.tau1 / n).sqrt();
        assert!((mean - cfg.a).abs() < 3.0 * se, "{mean}");

        let pts: Vec<[f64; 2]> = d.obs.insitu.iter().map(|r| [r.x, r.y]).collect();
        let a_pt = point_projection(&d.mesh, &pts).unwrap();
        let res: Vec<f64> = d
            .obs
            .insitu
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.value
                    - a_pt
                        .row(i)
                        .map(|(c, w)| w * d.field[r.t - 1][c])
                        .sum::<f64>()
            })
            .collect();
        assert!(res.len() >= 500);
        let var = res.iter().map(|e| e * e).sum::<f64>() / res.len() as f64;
        assert!((var * cfg.truth.tau2 - 1.0).abs() < 0.2, "{var}");
    }

    #[test]
    fn stationary_marginal_variance() {
        // Pooled over days and replications at interior vertices.
        let cfg = ScenarioConfig {
            beta: [0.0; 3],
            t_len: 3,
            train_days: 1,
            ..small()
        };
        let mesh = cfg.sim_mesh().unwrap();
        let inner: Vec<usize> = (0..mesh.num_vertices())
            .filter(|&g| {
                let v = mesh.vertices()[g];
                v[0] > -83.25 && v[0] < -82.77 && v[1] > 41.62 && v[1] < 41.77
            })
            .collect();
        assert!(!inner.is_empty());
        let (mut s, mut n) = (0.0, 0.0);
        for rep in 0..150 {
            let d = simulate_scenario(&cfg.with_seed(rep)).unwrap();
            for day in &d.field {
                for &g in &inner {
                    s += day[g] * day[g];
                    n += 1.0;
                }
            }
        }
        let var = s / n;
        let want = 0.25 / (1.0 - 0.49);
        assert!((var / want - 1.0).abs() < 0.25, "{var} vs {want}");
    }
}
