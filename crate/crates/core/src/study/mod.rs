//! Replicated simulation study and its evaluation metrics.

mod metrics;
mod runner;

pub use metrics::{compute_param_metrics, compute_pred_rmse};
pub use runner::{
    aggregate, evaluate_model, replication_seed, run_study, run_study_with, write_aggregate_csv,
    write_metrics_csv, write_timing_csv, AggregateRow, MetricsRecord, ParamMetric, StudyOutput,
    MAX_FAILURE_FRACTION,
};
