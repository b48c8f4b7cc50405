use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{
    cohens_kappa, empirical_chance_level, mean_detection_time, permutation_chance_level, roc_auc,
    trial_accuracy_pct, trial_correctness, ChanceMode, Confusion, RocCurve, TrialOutcome,
};
use crate::features::WindowSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Intrasession,
    Intersession,
    Intersubject,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Intrasession => "intrasession",
            Regime::Intersession => "intersession",
            Regime::Intersubject => "intersubject",
        }
    }
}

/// Scores of one test trial, with the threshold of the detector that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialPrediction {
    pub trial_index: usize,
    /// Outer fold (0 for transfer evaluations).
    pub fold: usize,
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub threshold: f64,
}

impl TrialPrediction {
    pub fn flags(&self) -> Vec<bool> {
        self.scores.iter().map(|&s| s >= self.threshold).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChanceConfig {
    pub mode: ChanceMode,
    pub alpha: f64,
    pub permutations: usize,
    pub seed: u64,
}

impl Default for ChanceConfig {
    fn default() -> Self {
        Self { mode: ChanceMode::Binomial, alpha: 0.05, permutations: 1000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n_trials: usize,
    pub n_windows: usize,
    pub auc: f64,
    pub kappa: f64,
    pub confusion: Confusion,
    pub window_accuracy_pct: f64,
    pub chance_level_pct: f64,
    pub trial_accuracy_pct: f64,
    pub mean_detection_time_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub threshold: f64,
    pub metrics: Metrics,
}

/// Everything computed for one set of test predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub metrics: Metrics,
    pub roc: RocCurve,
    pub per_fold: Vec<FoldMetrics>,
    pub trials: Vec<TrialOutcome>,
}

/// One row of results: a model kind under a regime, tested on one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub regime: Regime,
    pub model_kind: String,
    pub subject_id: String,
    pub test_session: String,
    pub train_sessions: Vec<String>,
    pub evaluation: Evaluation,
}

fn metrics_and_outcomes(
    trials: &[&TrialPrediction],
    spec: &WindowSpec,
    chance: &ChanceConfig,
) -> Result<(Metrics, RocCurve, Vec<TrialOutcome>)> {
    if trials.is_empty() {
        return Err(Error::EmptyInput("no test trials"));
    }
    let scores: Vec<f64> = trials.iter().flat_map(|t| t.scores.iter().copied()).collect();
    let labels: Vec<bool> = trials.iter().flat_map(|t| t.labels.iter().copied()).collect();
    let flags: Vec<bool> = trials.iter().flat_map(|t| t.flags()).collect();
    let roc = roc_auc(&scores, &labels)?;
    let confusion = Confusion::from_predictions(&flags, &labels)?;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let chance_level_pct = match chance.mode {
        ChanceMode::Binomial => {
            empirical_chance_level(labels.len() as u64, n_pos as f64 / labels.len() as f64, chance.alpha)?
        }
        ChanceMode::Permutation => {
            permutation_chance_level(&flags, &labels, chance.permutations, chance.alpha, chance.seed)?
        }
    };
    let outcomes = trials
        .iter()
        .map(|t| Ok(trial_correctness(t.trial_index, &t.flags(), &t.labels)?.with_detection_time(spec)))
        .collect::<Result<Vec<_>>>()?;
    let metrics = Metrics {
        n_trials: trials.len(),
        n_windows: labels.len(),
        auc: roc.auc,
        kappa: cohens_kappa(&confusion),
        confusion,
        window_accuracy_pct: 100.0 * confusion.accuracy(),
        chance_level_pct,
        trial_accuracy_pct: trial_accuracy_pct(&outcomes),
        mean_detection_time_s: mean_detection_time(&outcomes),
    };
    Ok((metrics, roc, outcomes))
}

/// Pooled metrics over all trials plus a per-fold breakdown. Folds whose
/// test windows hold a single class get no AUC and are left out of the breakdown.
pub fn evaluate_predictions(predictions: &[TrialPrediction], spec: &WindowSpec, chance: &ChanceConfig) -> Result<Evaluation> {
    let all: Vec<&TrialPrediction> = predictions.iter().collect();
    let (metrics, roc, trials) = metrics_and_outcomes(&all, spec, chance)?;
    let mut folds: Vec<usize> = predictions.iter().map(|p| p.fold).collect();
    folds.sort_unstable();
    folds.dedup();
    let mut per_fold = Vec::new();
    for fold in folds {
        let subset: Vec<&TrialPrediction> = predictions.iter().filter(|p| p.fold == fold).collect();
        match metrics_and_outcomes(&subset, spec, chance) {
            Ok((m, _, _)) => per_fold.push(FoldMetrics { fold, threshold: subset[0].threshold, metrics: m }),
            Err(Error::SingleClass) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(Evaluation { metrics, roc, per_fold, trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::default_labels;
    use alloc::vec;

    fn pred(trial: usize, fold: usize, hit: usize) -> TrialPrediction {
        let mut scores = vec![0.1; 41];
        scores[hit - 1] = 0.9;
        TrialPrediction { trial_index: trial, fold, scores, labels: default_labels(41, 8), threshold: 0.5 }
    }

    #[test]
    fn pooled_and_per_fold() {
        let preds = [pred(0, 0, 35), pred(1, 0, 3), pred(2, 1, 41), pred(3, 1, 40)];
        let e = evaluate_predictions(&preds, &WindowSpec::default(), &ChanceConfig::default()).unwrap();
        assert_eq!(e.metrics.trial_accuracy_pct, 75.0);
        assert_eq!(e.per_fold.len(), 2);
        assert_eq!(e.per_fold[0].metrics.trial_accuracy_pct, 50.0);
        assert_eq!(e.per_fold[1].metrics.trial_accuracy_pct, 100.0);
        let expected = (-1.25 + -0.5 + -0.625) / 3.0;
        assert!((e.metrics.mean_detection_time_s.unwrap() - expected).abs() < 1e-12);
        assert_eq!(e.metrics.n_windows, 164);
    }

    #[test]
    fn empty_predictions_are_an_error() {
        assert!(evaluate_predictions(&[], &WindowSpec::default(), &ChanceConfig::default()).is_err());
    }
}
