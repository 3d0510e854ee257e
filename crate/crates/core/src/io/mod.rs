//! Configuration, file formats, subcommands and the static report.

pub mod commands;
pub mod config;
pub mod files;
pub mod report;

pub use commands::{cmd_fit, cmd_mesh, cmd_predict, cmd_report, cmd_simulate, cmd_study, FitFile, FitGridPoint};
pub use config::{IoPaths, MeshConfig, RunConfig, StudyConfig};
