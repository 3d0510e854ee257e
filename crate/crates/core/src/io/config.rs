//! JSON run configuration shared by all subcommands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_mesh, Mesh};
use crate::inference::{OptimizerConfig, PriorSpec};
use crate::model::{ModelKind, ScenarioConfig};

/// Fit-mesh override: used instead of the scenario's own mesh levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub max_edge_inner: f64,
    pub max_edge_outer: f64,
    pub outer_pad: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            max_edge_inner: 0.05,
            max_edge_outer: 0.2,
            outer_pad: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    /// Scenario ids from the design table (1–12).
    pub scenarios: Vec<usize>,
    pub models: Vec<ModelKind>,
    pub n_sim: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            scenarios: (1..=12).collect(),
            models: ModelKind::ALL.to_vec(),
            n_sim: 20,
        }
    }
}

/// File names, resolved against the output directory unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoPaths {
    pub insitu: PathBuf,
    pub satellite: PathBuf,
    pub grid: PathBuf,
    pub truth: PathBuf,
    pub mesh: PathBuf,
    pub fit: PathBuf,
    pub predictions: PathBuf,
    /// Optional `x,y,t` file of extra point targets for `predict`.
    pub targets: Option<PathBuf>,
    pub metrics: PathBuf,
    pub aggregate: PathBuf,
    pub timing: PathBuf,
    pub report: PathBuf,
    pub rmse_by_day: PathBuf,
}

impl Default for IoPaths {
    fn default() -> Self {
        IoPaths {
            insitu: "insitu.csv".into(),
            satellite: "satellite.csv".into(),
            grid: "grid.csv".into(),
            truth: "truth.csv".into(),
            mesh: "mesh.json".into(),
            fit: "fit.json".into(),
            predictions: "predictions.csv".into(),
            targets: None,
            metrics: "metrics.csv".into(),
            aggregate: "aggregate.csv".into(),
            timing: "timing.csv".into(),
            report: "report.svg".into(),
            rmse_by_day: "rmse_by_day.csv".into(),
        }
    }
}

impl IoPaths {
    pub fn resolve(&self, out: &Path, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            out.join(p)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Base seed; overrides `scenario.seed`.
    pub seed: u64,
    pub model: ModelKind,
    pub scenario: ScenarioConfig,
    pub mesh: Option<MeshConfig>,
    pub priors: PriorSpec,
    pub optimizer: OptimizerConfig,
    pub study: StudyConfig,
    pub io: IoPaths,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            model: ModelKind::Fusion,
            scenario: ScenarioConfig::default(),
            mesh: None,
            priors: PriorSpec::default(),
            optimizer: OptimizerConfig::default(),
            study: StudyConfig::default(),
            io: IoPaths::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, file: &Path) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| {
            Error::config(format!("{}:{}:{}: {}", file.display(), e.line(), e.column(), e))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.priors.validate()?;
        if let Some(m) = &self.mesh {
            if !(m.max_edge_inner > 0.0 && m.max_edge_outer > 0.0 && m.outer_pad >= 0.0) {
                return Err(Error::config("mesh edges must be positive and the pad nonnegative"));
            }
        }
        if self.study.n_sim == 0 {
            return Err(Error::config("study.n_sim must be at least 1"));
        }
        for &id in &self.study.scenarios {
            ScenarioConfig::table1(id)?;
        }
        Ok(())
    }

    /// Scenario with the run seed applied.
    pub fn scenario(&self) -> ScenarioConfig {
        self.scenario.with_seed(self.seed)
    }

    pub fn fit_mesh(&self) -> Result<Mesh> {
        match &self.mesh {
            Some(m) => build_mesh(&self.scenario.domain_polygon()?, m.max_edge_inner, m.outer_pad, m.max_edge_outer),
            None => self.scenario.fit_mesh(),
        }
    }

    /// Study scenarios: design-table rows with this run's time horizon
    /// and sample sizes.
    pub fn study_scenarios(&self) -> Result<Vec<ScenarioConfig>> {
        self.study
            .scenarios
            .iter()
            .map(|&id| {
                let base = ScenarioConfig::table1(id)?;
                Ok(ScenarioConfig {
                    t_len: self.scenario.t_len,
                    train_days: self.scenario.train_days,
                    n_samp: self.scenario.n_samp,
                    n_pred: self.scenario.n_pred,
                    domain: self.scenario.domain.clone(),
                    ..base
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let mut cfg = RunConfig::default();
        cfg.seed = 99;
        cfg.mesh = Some(MeshConfig::default());
        cfg.io.targets = Some("t.csv".into());
        let text = cfg.to_json();
        let back = RunConfig::from_json(&text, Path::new("c.json")).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = RunConfig::from_json("{}", Path::new("c.json")).unwrap();
        assert_eq!(cfg, RunConfig::default());
        let cfg = RunConfig::from_json(r#"{"scenario": {"n_insitu": 7}, "model": "insitu"}"#, Path::new("c.json")).unwrap();
        assert_eq!(cfg.scenario.n_insitu, 7);
        assert_eq!(cfg.scenario.t_len, 19);
        assert_eq!(cfg.model, ModelKind::Insitu);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [r#"{"sed": 1}"#, r#"{"optimizer": {"max_iter": 5}}"#, r#"{"io": {"fits": "x"}}"#] {
            match RunConfig::from_json(text, Path::new("bad.json")) {
                Err(e @ Error::Config(_)) => {
                    assert!(e.to_string().contains("bad.json:1:"), "{e}");
                    assert_eq!(e.exit_code(), 2);
                }
                other => panic!("expected a configuration error, got {other:?}"),
            }
        }
    }

    #[test]
    fn parse_error_position() {
        let text = "{\n  \"seed\": 1,\n  \"model\": \"oops\"\n}";
        let e = RunConfig::from_json(text, Path::new("c.json")).unwrap_err();
        assert!(e.to_string().contains("c.json:3:"), "{e}");
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(matches!(RunConfig::from_json(r#"{"study": {"scenarios": [13]}}"#, Path::new("c")), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_json(r#"{"scenario": {"missing_pct": 1.5}}"#, Path::new("c")), Err(Error::Config(_))));
    }
}
