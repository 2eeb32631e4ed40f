//! Evaluation: threshold metrics, the repeated-trial harness and synthetic
//! data generators.

pub mod generators;
pub mod metrics;
pub mod trials;

pub use generators::{gen_scores, gen_scores_as, gen_vectors, DistSpec, ScoreDist, VectorDist};
pub use metrics::{
    aupr, auroc, auroc_from_scores, detection_error_and_fpr_at_95tpr, LabeledPValues, Positive,
};
pub use trials::{
    metrics_csv, run_trials, split_pool, EvalMethod, MethodName, MetricRow, TrialOutput, TrialPlan,
    METRICS_CSV_HEADER,
};
