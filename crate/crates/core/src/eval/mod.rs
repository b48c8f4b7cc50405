//! Window and trial performance metrics, chance levels, detection latency
//! and the paired statistics used for feature comparisons.

mod chance;
mod kappa;
mod report;
mod roc;
mod stats;
mod trial;

pub use chance::{empirical_chance_level, permutation_chance_level, ChanceMode};
pub use kappa::{cohens_kappa, Confusion};
pub use report::{evaluate_predictions, ChanceConfig, Evaluation, EvaluationReport, FoldMetrics, Metrics, Regime, TrialPrediction};
pub use roc::{roc_auc, RocCurve, RocPoint};
pub use stats::{bonferroni_holm, wilcoxon_signed_rank, HolmResult, WilcoxonResult, WILCOXON_EXACT_MAX_N};
pub use trial::{
    default_labels, detection_time, mean_detection_time, trial_accuracy_pct, trial_correctness, TrialOutcome,
};
