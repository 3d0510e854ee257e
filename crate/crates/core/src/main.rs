use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stfuse::io::{cmd_fit, cmd_mesh, cmd_predict, cmd_report, cmd_simulate, cmd_study, RunConfig};
use stfuse::Result;

#[derive(Parser)]
#[command(name = "stfuse", version, about = "Space-time fusion of point and areal data")]
struct Cli {
    /// JSON run configuration; defaults are used for anything omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory for inputs and outputs.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the fit mesh and write mesh.json.
    Mesh,
    /// Simulate one replication: insitu.csv, satellite.csv, grid.csv, truth.csv.
    Simulate,
    /// Fit the configured model and write fit.json.
    Fit,
    /// Predict from fit.json and write predictions.csv.
    Predict,
    /// Run the replicated study and write metrics.csv and aggregate.csv.
    Study,
    /// Render report.svg and rmse_by_day.csv from predictions.
    Report,
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| stfuse::Error::Config(format!("cannot start {n} workers: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| stfuse::Error::Io {
        path: cli.out.clone(),
        source: e,
    })?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Mesh => cmd_mesh(&cfg, out).map(|_| ()),
        Command::Simulate => cmd_simulate(&cfg, out),
        Command::Fit => cmd_fit(&cfg, out).map(|_| ()),
        Command::Predict => cmd_predict(&cfg, out).map(|_| ()),
        Command::Study => cmd_study(&cfg, out),
        Command::Report => cmd_report(&cfg, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("STFUSE_LOG", "error")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
