use std::path::Path;
use std::process::{Command, Output};

use stfuse::io::files::{read_predictions, PredictionKind};
use stfuse::io::FitFile;

const SMALL: &str = r#"{
  "seed": 3,
  "scenario": {"max_edge_inner": 0.15, "sim_max_edge": 0.1, "t_len": 6, "train_days": 4, "n_insitu": 5, "n_pred": 6}
}"#;

fn stfuse(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stfuse"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .unwrap()
}

fn ok(out: Output) {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn small_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(d, SMALL);
    for cmd in ["mesh", "simulate", "fit", "predict", "report"] {
        ok(stfuse(d, &[cmd, "--config", &cfg]));
    }
    let fit: FitFile = serde_json::from_str(&std::fs::read_to_string(d.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit.schema_version, 1);
    assert!(fit.parameter("a").is_some());
    assert_eq!(fit.t_len, 6);
    let w: f64 = fit.grid.iter().map(|g| g.weight).sum();
    assert!((w - 1.0).abs() < 1e-12);

    let preds = read_predictions(&d.join("predictions.csv")).unwrap();
    let sat = std::fs::read_to_string(d.join("satellite.csv")).unwrap();
    let observed = sat.lines().count() - 1;
    let blocks = preds.iter().filter(|p| p.kind == PredictionKind::Block).count();
    let cells_per_day = preds.iter().filter(|p| p.kind == PredictionKind::Block && p.t == 6).count();
    assert_eq!(blocks + observed, 6 * cells_per_day);
    assert_eq!(preds.iter().filter(|p| p.kind == PredictionKind::Point).count(), 36);

    let svg = std::fs::read_to_string(d.join("report.svg")).unwrap();
    assert_eq!(svg.matches(r#"data-stat="mean""#).count(), 6);
    assert_eq!(svg.matches(r#"data-stat="sd""#).count(), 6);
    let rmse = std::fs::read_to_string(d.join("rmse_by_day.csv")).unwrap();
    assert_eq!(rmse.lines().count(), 7);

    // Standalone in situ model: no bias row.
    let cfg = write_config(d, &SMALL.replacen("\"seed\": 3,", "\"seed\": 3, \"model\": \"insitu\",", 1));
    ok(stfuse(d, &["fit", "--config", &cfg]));
    let fit: FitFile = serde_json::from_str(&std::fs::read_to_string(d.join("fit.json")).unwrap()).unwrap();
    assert!(fit.parameter("a").is_none());
    assert!(fit.parameter("tau1").is_none());
    assert!(fit.parameter("tau2").is_some());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bad = write_config(d, r#"{"seed": 1, "sede": 2}"#);
    let out = stfuse(d, &["mesh", "--config", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config.json:1:"));

    let out = stfuse(d, &["fit"]);
    assert_eq!(out.status.code(), Some(4));

    let cfg = write_config(d, SMALL);
    ok(stfuse(d, &["simulate", "--config", &cfg]));
    let path = d.join("insitu.csv");
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("9,0.1,zz,1,0.5\n");
    let line = text.lines().count();
    std::fs::write(&path, text).unwrap();
    let out = stfuse(d, &["fit", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(4));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains(&format!("insitu.csv:{line}:3")), "{msg}");

    // A satellite row naming a cell outside the grid is a configuration error.
    ok(stfuse(d, &["simulate", "--config", &cfg]));
    let path = d.join("satellite.csv");
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("100000,1,0.5\n");
    std::fs::write(&path, text).unwrap();
    assert_eq!(stfuse(d, &["fit", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn study_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = write_config(
        d,
        r#"{"study": {"scenarios": [2], "models": ["fusion", "satellite"], "n_sim": 2},
            "scenario": {"t_len": 5, "train_days": 3, "n_samp": 20, "n_pred": 5}}"#,
    );
    ok(stfuse(d, &["study", "--config", &cfg, "--workers", "1"]));
    let metrics = std::fs::read_to_string(d.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("scenario,model,replication,metric,key,value\n"));
    assert!(metrics.contains("2,fusion,1,rmse,a,"));
    assert!(!metrics.contains("satellite,0,bias,a,"));
    let agg = std::fs::read_to_string(d.join("aggregate.csv")).unwrap();
    assert!(agg.contains("2,satellite,pred_rmse,5,"));
    assert!(d.join("timing.csv").exists());
}
