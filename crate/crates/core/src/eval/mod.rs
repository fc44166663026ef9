//! Cross-validation, metrics and experiment reporting.

pub mod experiment;
pub mod kfold;
pub mod metrics;
pub mod report;

pub use experiment::{run_experiment, ExperimentPlan, ExperimentResults, Preset, Target};
pub use kfold::{kfold_indices, kfold_split, Fold};
pub use metrics::{per_class_metrics, weighted_f, ClassMetrics, ConfusionMatrix, MetricsReport};
pub use report::{write_results, ResultsSummary};
