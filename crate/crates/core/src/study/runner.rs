//! Replicated simulate-and-fit runs over scenarios and models.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{compute_param_metrics, compute_pred_rmse};
use crate::error::{Error, Result};
use crate::geometry::Mesh;
use crate::io::files::csv_error;
use crate::inference::{fit, predict_mean, sample_posterior, OptimizerConfig, PriorSpec, Target};
use crate::model::{assemble, simulate_scenario, ModelKind, ScenarioConfig, SimulatedData};

/// Largest tolerated share of failed fits per (scenario, model) cell.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamMetric {
    pub name: String,
    pub bias: f64,
    pub rmse: f64,
}

/// Outcome of one fit. A failed fit has `error` set and no metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub scenario: usize,
    pub model: ModelKind,
    pub replication: usize,
    pub params: Vec<ParamMetric>,
    /// Prediction RMSE for days `1..=t_len`.
    pub pred_rmse: Vec<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

impl MetricsRecord {
    pub fn param(&self, name: &str) -> Option<&ParamMetric> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn failed(&self) -> bool {
        self.error.is_some()
    }

    /// Mean prediction RMSE over days `from..=to`.
    pub fn mean_pred_rmse(&self, from: usize, to: usize) -> f64 {
        let d = &self.pred_rmse[from - 1..to];
        d.iter().sum::<f64>() / d.len() as f64
    }
}

/// Mean over successful replications of one metric in one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub scenario: usize,
    pub model: ModelKind,
    /// `bias`, `rmse` or `pred_rmse`.
    pub metric: String,
    /// Parameter name, or the day for `pred_rmse`.
    pub key: String,
    pub value: f64,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub records: Vec<MetricsRecord>,
    pub aggregate: Vec<AggregateRow>,
}

impl StudyOutput {
    pub fn cell(&self, scenario: usize, model: ModelKind) -> impl Iterator<Item = &MetricsRecord> {
        self.records
            .iter()
            .filter(move |r| r.scenario == scenario && r.model == model && !r.failed())
    }

    pub fn aggregate_value(
        &self,
        scenario: usize,
        model: ModelKind,
        metric: &str,
        key: &str,
    ) -> Option<f64> {
        self.aggregate
            .iter()
            .find(|r| {
                r.scenario == scenario && r.model == model && r.metric == metric && r.key == key
            })
            .map(|r| r.value)
    }
}

/// Fits one model to one replication and scores it.
pub fn evaluate_model(
    cfg: &ScenarioConfig,
    data: &SimulatedData,
    fit_mesh: &Mesh,
    kind: ModelKind,
    priors: &PriorSpec,
    opt: &OptimizerConfig,
    sample_seed: u64,
) -> Result<(Vec<ParamMetric>, Vec<f64>)> {
    let train = data.obs.through_day(cfg.train_days);
    let system = assemble(kind, &train, fit_mesh, &data.blocks, cfg.truth)?;
    let f = fit(&system, priors, opt)?;

    let draws = sample_posterior(&f, cfg.n_samp, sample_seed, false)?;
    let mut params = Vec::new();
    let mut push = |name: &str, s: Vec<f64>, truth: f64| -> Result<()> {
        let (bias, rmse) = compute_param_metrics(&s, truth)?;
        params.push(ParamMetric {
            name: name.to_string(),
            bias,
            rmse,
        });
        Ok(())
    };
    for (k, name) in f.fixed_names().into_iter().enumerate() {
        let truth = if name == "a" { cfg.a } else { cfg.beta[k] };
        push(name, draws.fixed.iter().map(|d| d[k]).collect(), truth)?;
    }
    let th = &draws.theta;
    let tr = cfg.truth;
    push("rho", th.iter().map(|t| t.rho).collect(), tr.rho)?;
    push("kappa", th.iter().map(|t| t.kappa).collect(), tr.kappa)?;
    push(
        "sigma2_omega",
        th.iter().map(|t| t.sigma2()).collect(),
        tr.sigma2(),
    )?;
    if kind.uses_satellite() {
        push("tau1", th.iter().map(|t| t.tau1).collect(), tr.tau1)?;
    }
    if kind.uses_insitu() {
        push("tau2", th.iter().map(|t| t.tau2).collect(), tr.tau2)?;
    }

    let n_loc = data.holdout.len();
    let targets: Vec<Target> = (1..=cfg.t_len)
        .flat_map(|t| data.holdout.iter().map(move |&p| Target::point(p, t)))
        .collect();
    let flat = predict_mean(&f, fit_mesh, &targets)?;
    let pred: Vec<Vec<f64>> = flat.chunks(n_loc).map(<[f64]>::to_vec).collect();
    let rmse = compute_pred_rmse(&pred, &data.holdout_truth)?;
    Ok((params, rmse))
}

/// Per-replication seed.
pub fn replication_seed(base: u64, replication: usize) -> u64 {
    base.wrapping_add(replication as u64)
}

fn sample_seed(rep_seed: u64, kind: ModelKind) -> u64 {
    let k = ModelKind::ALL.iter().position(|&m| m == kind).unwrap_or(0) as u64;
    rep_seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(k + 1)
}

/// Runs `n_sim` replications of every scenario, fitting every model to the
/// same simulated data in each replication.
pub fn run_study(
    scenarios: &[ScenarioConfig],
    models: &[ModelKind],
    n_sim: usize,
    seed: u64,
) -> Result<StudyOutput> {
    run_study_with(
        scenarios,
        models,
        n_sim,
        seed,
        &PriorSpec::default(),
        &OptimizerConfig::default(),
    )
}

pub fn run_study_with(
    scenarios: &[ScenarioConfig],
    models: &[ModelKind],
    n_sim: usize,
    seed: u64,
    priors: &PriorSpec,
    opt: &OptimizerConfig,
) -> Result<StudyOutput> {
    if n_sim == 0 || models.is_empty() || scenarios.is_empty() {
        return Err(Error::config(
            "study needs at least one scenario, model and replication",
        ));
    }
    priors.validate()?;
    let meshes = scenarios
        .iter()
        .map(|s| {
            s.validate()?;
            s.fit_mesh()
        })
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|s| (0..n_sim).map(move |j| (s, j)))
        .collect();
    let per_job = jobs
        .par_iter()
        .map(|&(s, j)| -> Result<Vec<MetricsRecord>> {
            let rep_seed = replication_seed(seed, j);
            let cfg = scenarios[s].with_seed(rep_seed);
            let data = simulate_scenario(&cfg)?;
            let mut out = Vec::with_capacity(models.len());
            for &kind in models {
                let start = Instant::now();
                let res = evaluate_model(
                    &cfg,
                    &data,
                    &meshes[s],
                    kind,
                    priors,
                    opt,
                    sample_seed(rep_seed, kind),
                );
                let seconds = start.elapsed().as_secs_f64();
                let (params, pred_rmse, error) = match res {
                    Ok((p, r)) => (p, r, None),
                    Err(e @ (Error::Fit { .. } | Error::Numerical(_))) => {
                        log::warn!("scenario {} replication {} {}: {e}", cfg.id, j, kind);
                        (Vec::new(), Vec::new(), Some(e.to_string()))
                    }
                    Err(e) => return Err(e),
                };
                out.push(MetricsRecord {
                    scenario: cfg.id,
                    model: kind,
                    replication: j,
                    params,
                    pred_rmse,
                    seconds,
                    error,
                });
            }
            log::info!("scenario {} replication {} done", scenarios[s].id, j);
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut records: Vec<MetricsRecord> = per_job.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.scenario, r.model, r.replication));

    check_failures(&records)?;
    let aggregate = aggregate(&records);
    Ok(StudyOutput { records, aggregate })
}

fn check_failures(records: &[MetricsRecord]) -> Result<()> {
    let mut cells: BTreeMap<(usize, ModelKind), (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = cells.entry((r.scenario, r.model)).or_default();
        e.0 += 1;
        e.1 += r.failed() as usize;
    }
    for ((s, m), (n, failed)) in cells {
        if failed as f64 > MAX_FAILURE_FRACTION * n as f64 {
            return Err(Error::Study(format!(
                "scenario {s}, model {m}: {failed} of {n} fits failed"
            )));
        }
    }
    Ok(())
}

/// Arithmetic means over successful replications.
pub fn aggregate(records: &[MetricsRecord]) -> Vec<AggregateRow> {
    let mut acc: BTreeMap<(usize, ModelKind, usize, String), (f64, usize)> = BTreeMap::new();
    // Metric order: bias, rmse, pred_rmse; parameters keep first-seen order.
    let mut order: Vec<String> = Vec::new();
    let mut add = |key: (usize, ModelKind, usize, String), v: f64| {
        let e = acc.entry(key).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
    };
    for r in records.iter().filter(|r| !r.failed()) {
        for p in &r.params {
            let idx = match order.iter().position(|n| *n == p.name) {
                Some(i) => i,
                None => {
                    order.push(p.name.clone());
                    order.len() - 1
                }
            };
            add((r.scenario, r.model, 2 * idx, "bias".into()), p.bias);
            add((r.scenario, r.model, 2 * idx + 1, "rmse".into()), p.rmse);
        }
        for (t, v) in r.pred_rmse.iter().enumerate() {
            add((r.scenario, r.model, 1000 + t, "pred_rmse".into()), *v);
        }
    }
    acc.into_iter()
        .map(|((scenario, model, slot, metric), (sum, n))| AggregateRow {
            scenario,
            model,
            key: if slot >= 1000 {
                (slot - 999).to_string()
            } else {
                order[slot / 2].clone()
            },
            metric,
            value: sum / n as f64,
            n,
        })
        .collect()
}

/// Long format: `scenario,model,replication,metric,key,value`. A failed fit
/// is one `failed` row.
pub fn write_metrics_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let io = |e| csv_error(path, e);
    w.write_record(["scenario", "model", "replication", "metric", "key", "value"])
        .map_err(io)?;
    for r in records {
        let head = [
            r.scenario.to_string(),
            r.model.to_string(),
            r.replication.to_string(),
        ];
        let mut row = |metric: &str, key: &str, value: f64| {
            w.write_record([
                &head[0],
                &head[1],
                &head[2],
                metric,
                key,
                &value.to_string(),
            ])
        };
        if r.failed() {
            row("failed", "", 1.0).map_err(io)?;
            continue;
        }
        for p in &r.params {
            row("bias", &p.name, p.bias).map_err(io)?;
            row("rmse", &p.name, p.rmse).map_err(io)?;
        }
        for (t, v) in r.pred_rmse.iter().enumerate() {
            row("pred_rmse", &(t + 1).to_string(), *v).map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `scenario,model,metric,key,value,n`.
pub fn write_aggregate_csv(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Wall-clock seconds per fit: `scenario,model,replication,seconds`.
pub fn write_timing_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let io = |e| csv_error(path, e);
    w.write_record(["scenario", "model", "replication", "seconds"])
        .map_err(io)?;
    for r in records {
        w.write_record([
            r.scenario.to_string(),
            r.model.to_string(),
            r.replication.to_string(),
            r.seconds.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}


#[cfg(test)]
mod tests {
    use super::*;

    fn quick(id: usize) -> ScenarioConfig {
        ScenarioConfig {
            sim_max_edge: 0.1,
            t_len: 6,
            train_days: 4,
            n_samp: 40,
            n_pred: 8,
            ..ScenarioConfig::table1(id).unwrap()
        }
    }

    fn record(model: ModelKind, j: usize, failed: bool, v: f64) -> MetricsRecord {
        MetricsRecord {
            scenario: 1,
            model,
            replication: j,
            params: vec![ParamMetric {
                name: "rho".into(),
                bias: v,
                rmse: 2.0 * v,
            }],
            pred_rmse: vec![v, 2.0 * v],
            seconds: 0.0,
            error: failed.then(|| "boom".to_string()),
        }
    }

    #[test]
    fn smoke_run() {
        let out = run_study(&[quick(2)], &ModelKind::ALL, 2, 17).unwrap();
        assert_eq!(out.records.len(), 6);
        for r in &out.records {
            assert!(!r.failed(), "{:?}", r.error);
            assert_eq!(r.pred_rmse.len(), 6);
            assert_eq!(r.param("a").is_some(), r.model == ModelKind::Fusion);
            assert_eq!(r.param("tau1").is_some(), r.model != ModelKind::Insitu);
            for p in &r.params {
                assert!(p.rmse + 1e-12 >= p.bias.abs());
            }
        }
        let again = run_study(&[quick(2)], &ModelKind::ALL, 2, 17).unwrap();
        for (a, b) in out.records.iter().zip(&again.records) {
            assert_eq!((&a.params, &a.pred_rmse), (&b.params, &b.pred_rmse));
        }
        assert_eq!(out.aggregate, again.aggregate);
        let v = out
            .aggregate_value(2, ModelKind::Fusion, "rmse", "beta1")
            .unwrap();
        let mean = out
            .cell(2, ModelKind::Fusion)
            .map(|r| r.param("beta1").unwrap().rmse)
            .sum::<f64>()
            / 2.0;
        assert!((v - mean).abs() < 1e-15);
        assert!(out
            .aggregate_value(2, ModelKind::Insitu, "bias", "a")
            .is_none());
    }

    #[test]
    fn models_share_data() {
        let cfg = quick(2).with_seed(replication_seed(5, 3));
        let a = simulate_scenario(&cfg).unwrap();
        let b = simulate_scenario(&cfg).unwrap();
        assert_eq!(a.obs, b.obs);
        assert_eq!(a.holdout, b.holdout);
        assert_eq!(replication_seed(5, 3), 8);
    }

    #[test]
    fn failure_threshold() {
        let mut recs: Vec<MetricsRecord> = (0..5)
            .map(|j| record(ModelKind::Fusion, j, j == 0, 1.0))
            .collect();
        check_failures(&recs).unwrap();
        recs[1].error = Some("boom".into());
        assert!(matches!(check_failures(&recs), Err(Error::Study(_))));
    }

    #[test]
    fn aggregate_is_mean_of_successes() {
        let recs = vec![
            record(ModelKind::Insitu, 0, false, 1.0),
            record(ModelKind::Insitu, 1, false, 3.0),
            record(ModelKind::Insitu, 2, true, 100.0),
        ];
        let agg = aggregate(&recs);
        let get = |m: &str, k: &str| agg.iter().find(|r| r.metric == m && r.key == k).unwrap();
        assert_eq!(get("bias", "rho").value, 2.0);
        assert_eq!(get("rmse", "rho").value, 4.0);
        assert_eq!(get("pred_rmse", "2").value, 4.0);
        assert_eq!(get("pred_rmse", "1").n, 2);
        assert_eq!(agg.len(), 4);
    }

    #[test]
    fn csv_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![
            record(ModelKind::Fusion, 0, false, 0.5),
            record(ModelKind::Fusion, 1, true, 0.0),
        ];
        let p = dir.path().join("metrics.csv");
        write_metrics_csv(&p, &recs).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "scenario,model,replication,metric,key,value");
        assert_eq!(lines[1], "1,fusion,0,bias,rho,0.5");
        assert_eq!(lines.last().unwrap(), &"1,fusion,1,failed,,1");
        let q = dir.path().join("aggregate.csv");
        write_aggregate_csv(&q, &aggregate(&recs)).unwrap();
        let text = std::fs::read_to_string(&q).unwrap();
        assert!(text.starts_with("scenario,model,metric,key,value,n\n1,fusion,bias,rho,0.5,1\n"));
    }
}
