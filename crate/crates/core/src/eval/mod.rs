//! Metrics, cross-validation and transfer harnesses, and Elo-versus-model
//! comparisons.

mod correlation;
mod harness;
mod metrics;
mod report;

pub use correlation::{correlate_points, elo_vs_model, pearson, ranks, CorrelationPoint, CorrelationReport};
pub use harness::{
    kfold_cv, mean_and_standard_error, transfer_eval, CrossValidationReport, EvaluationPlan, PipelineFilter,
    TransferReport,
};
pub use metrics::{
    brier_score, compute_metrics, kl_divergence, total_variation, two_way, MetricsMode, MetricsReport,
    DIRECTIONAL_THRESHOLD,
};
pub use report::{read_json, write_correlation_csv, write_json, write_metrics_csv, MetricsRow};
