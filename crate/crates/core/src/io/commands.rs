//! Subcommand bodies. Each reads its inputs from and writes its outputs to
//! the output directory named in the call.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::files::*;
use super::report::{render_report, rmse_by_day};
use crate::error::{Error, Result};
use crate::geometry::{BlockSet, Mesh};
use crate::inference::{fit, fit_from_grid, predict, FitResult, ParamSummary, Target, TargetSite};
use crate::model::{assemble, simulate_scenario, Hyperparams, LinearGaussianSystem, ModelKind, ObservationSet};
use crate::study::{run_study_with, write_aggregate_csv, write_metrics_csv, write_timing_csv};

pub const FIT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitGridPoint {
    pub theta: Hyperparams,
    pub log_posterior: f64,
    pub weight: f64,
}

/// Contents of `fit.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub schema_version: u32,
    pub model: ModelKind,
    pub t_len: usize,
    pub n_insitu: usize,
    pub n_satellite: usize,
    pub evaluations: usize,
    pub start_log_posterior: f64,
    pub mode: usize,
    /// Mean, sd and 2.5%/97.5% quantiles per parameter.
    pub parameters: Vec<ParamSummary>,
    pub grid: Vec<FitGridPoint>,
}

impl FitFile {
    pub fn from_fit(f: &FitResult, obs: &ObservationSet) -> Self {
        FitFile {
            schema_version: FIT_SCHEMA_VERSION,
            model: f.kind(),
            t_len: f.system.t_len(),
            n_insitu: if f.kind().uses_insitu() { obs.insitu.len() } else { 0 },
            n_satellite: if f.kind().uses_satellite() { obs.satellite.len() } else { 0 },
            evaluations: f.trace.len(),
            start_log_posterior: f.start_log_posterior,
            mode: f.mode,
            parameters: f.summaries.clone(),
            grid: f
                .points
                .iter()
                .map(|p| FitGridPoint {
                    theta: p.theta,
                    log_posterior: p.log_posterior,
                    weight: p.weight,
                })
                .collect(),
        }
    }

    pub fn parameter(&self, name: &str) -> Option<&ParamSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

pub fn cmd_mesh(cfg: &RunConfig, out: &Path) -> Result<Mesh> {
    let mesh = cfg.fit_mesh()?;
    write_json(&cfg.io.resolve(out, &cfg.io.mesh), &MeshFile::from_mesh(&mesh))?;
    log::info!("mesh: {} vertices, {} triangles", mesh.num_vertices(), mesh.triangles().len());
    Ok(mesh)
}

/// Writes training-period observations, the pixel grid and held-out truth
/// for all days.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let sc = cfg.scenario();
    let sim = simulate_scenario(&sc)?;
    let train = sim.obs.through_day(sc.train_days);
    let io = &cfg.io;
    write_insitu(&io.resolve(out, &io.insitu), &train.insitu)?;
    write_satellite(&io.resolve(out, &io.satellite), &train.satellite)?;
    write_grid(&io.resolve(out, &io.grid), &sim.grid)?;
    let truth: Vec<TruthRow> = sim
        .holdout_truth
        .iter()
        .enumerate()
        .flat_map(|(t, day)| {
            sim.holdout.iter().zip(day).enumerate().map(move |(l, (p, &value))| TruthRow {
                location_id: l,
                x: p[0],
                y: p[1],
                t: t + 1,
                value,
            })
        })
        .collect();
    write_truth(&io.resolve(out, &io.truth), &truth)?;
    log::info!(
        "simulated {} in situ and {} satellite rows",
        train.insitu.len(),
        train.satellite.len()
    );
    Ok(())
}

struct Inputs {
    obs: ObservationSet,
    mesh: Mesh,
    blocks: BlockSet,
}

fn read_inputs(cfg: &RunConfig, out: &Path) -> Result<Inputs> {
    let io = &cfg.io;
    let insitu = read_insitu(&io.resolve(out, &io.insitu))?;
    let satellite = read_satellite(&io.resolve(out, &io.satellite))?;
    let grid = read_grid(&io.resolve(out, &io.grid))?;
    let domain = cfg.scenario.domain_polygon()?;
    let blocks = BlockSet::from_grid_within(&grid, &domain)?;
    let obs = ObservationSet::new(cfg.scenario.t_len, insitu, satellite, domain.centroid())?;
    Ok(Inputs {
        obs,
        mesh: cfg.fit_mesh()?,
        blocks,
    })
}

fn system(kind: ModelKind, inp: &Inputs) -> Result<LinearGaussianSystem> {
    assemble(kind, &inp.obs, &inp.mesh, &inp.blocks, Hyperparams::simulation_truth())
}

pub fn cmd_fit(cfg: &RunConfig, out: &Path) -> Result<FitFile> {
    let inp = read_inputs(cfg, out)?;
    let f = fit(&system(cfg.model, &inp)?, &cfg.priors, &cfg.optimizer)?;
    let file = FitFile::from_fit(&f, &inp.obs);
    write_json(&cfg.io.resolve(out, &cfg.io.fit), &file)?;
    write_json(&cfg.io.resolve(out, &cfg.io.mesh), &MeshFile::from_mesh(&inp.mesh))?;
    Ok(file)
}

/// Predicts the latent surface at every mesh vertex and held-out location,
/// and the satellite value of every block-day without an observation.
pub fn cmd_predict(cfg: &RunConfig, out: &Path) -> Result<Vec<PredictionRow>> {
    let io = &cfg.io;
    let stored: FitFile = read_json(&io.resolve(out, &io.fit))?;
    if stored.schema_version != FIT_SCHEMA_VERSION {
        return Err(Error::config(format!(
            "fit file schema version {} is not supported",
            stored.schema_version
        )));
    }
    let inp = read_inputs(cfg, out)?;
    let grid: Vec<(Hyperparams, f64)> = stored.grid.iter().map(|g| (g.theta, g.log_posterior)).collect();
    let f = fit_from_grid(&system(stored.model, &inp)?, &cfg.priors, &grid, stored.start_log_posterior)?;
    let t_len = f.system.t_len();

    let mut meta: Vec<(PredictionKind, usize, [f64; 2], usize)> = Vec::new();
    let mut targets: Vec<Target> = Vec::new();
    let mut push = |kind, id, p: [f64; 2], t, target: Target| {
        meta.push((kind, id, p, t));
        targets.push(target);
    };
    for t in 1..=t_len {
        for (v, &p) in inp.mesh.vertices().iter().enumerate() {
            push(PredictionKind::Vertex, v, p, t, Target::point(p, t));
        }
    }
    let truth_path = io.resolve(out, &io.truth);
    if truth_path.exists() {
        for r in read_truth(&truth_path)? {
            let p = [r.x, r.y];
            push(PredictionKind::Point, r.location_id, p, r.t, Target::point(p, r.t));
        }
    }
    if let Some(tp) = &io.targets {
        for (i, r) in read_targets(&io.resolve(out, tp))?.into_iter().enumerate() {
            let p = [r.x, r.y];
            push(PredictionKind::Point, i, p, r.t, Target::point(p, r.t));
        }
    }
    let seen: HashSet<(usize, usize)> = inp.obs.satellite.iter().map(|s| (s.block_id, s.t)).collect();
    for t in 1..=t_len {
        for (b, &id) in inp.blocks.blocks().iter().zip(inp.blocks.ids()) {
            if !seen.contains(&(id, t)) {
                let target = Target {
                    site: TargetSite::Block(b.clone()),
                    t,
                    observation: stored.model.uses_satellite(),
                };
                push(PredictionKind::Block, id, b.centroid(), t, target);
            }
        }
    }

    let preds = predict(&f, &inp.mesh, &targets)?;
    let rows: Vec<PredictionRow> = meta
        .into_iter()
        .zip(preds)
        .map(|((kind, id, p, t), pr)| PredictionRow {
            kind,
            id,
            x: p[0],
            y: p[1],
            t,
            mean: pr.mean,
            sd: pr.sd,
            q025: pr.q025,
            q975: pr.q975,
        })
        .collect();
    write_predictions(&io.resolve(out, &io.predictions), &rows)?;
    Ok(rows)
}

pub fn cmd_study(cfg: &RunConfig, out: &Path) -> Result<()> {
    let scenarios = cfg.study_scenarios()?;
    let res = run_study_with(&scenarios, &cfg.study.models, cfg.study.n_sim, cfg.seed, &cfg.priors, &cfg.optimizer)?;
    let io = &cfg.io;
    write_metrics_csv(&io.resolve(out, &io.metrics), &res.records)?;
    write_aggregate_csv(&io.resolve(out, &io.aggregate), &res.aggregate)?;
    write_timing_csv(&io.resolve(out, &io.timing), &res.records)?;
    Ok(())
}

pub fn cmd_report(cfg: &RunConfig, out: &Path) -> Result<()> {
    let io = &cfg.io;
    let mesh: MeshFile = read_json(&io.resolve(out, &io.mesh))?;
    let preds = read_predictions(&io.resolve(out, &io.predictions))?;
    let svg = render_report(&mesh, &preds)?;
    let report = io.resolve(out, &io.report);
    std::fs::write(&report, svg).map_err(|e| Error::io(&report, e))?;
    let truth_path = io.resolve(out, &io.truth);
    if truth_path.exists() {
        let table = rmse_by_day(&preds, &read_truth(&truth_path)?)?;
        let path = io.resolve(out, &io.rmse_by_day);
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        w.write_record(["day", "rmse", "n_locations"]).map_err(|e| csv_error(&path, e))?;
        for (d, r, n) in table {
            w.write_record([d.to_string(), r.to_string(), n.to_string()])
                .map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
