use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::features::WindowSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial_index: usize,
    pub window_flags: Vec<bool>,
    pub correct: bool,
    /// 1-based index of the first flagged positive window.
    pub first_tp_window: Option<usize>,
    pub detection_time_s: Option<f64>,
}

/// Labels of the default layout: relax windows followed by the last
/// `n_positive` premovement windows.
pub fn default_labels(n_windows: usize, n_positive: usize) -> Vec<bool> {
    (0..n_windows).map(|i| i + n_positive >= n_windows).collect()
}

/// A trial is correct when no negative window is flagged and at least one
/// positive window is.
pub fn trial_correctness(trial_index: usize, window_flags: &[bool], labels: &[bool]) -> Result<TrialOutcome> {
    if window_flags.len() != labels.len() {
        return Err(Error::LengthMismatch { expected: labels.len(), found: window_flags.len() });
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("trial has no windows"));
    }
    let false_positive = window_flags.iter().zip(labels).any(|(&f, &l)| f && !l);
    let first_tp_window = window_flags.iter().zip(labels).position(|(&f, &l)| f && l).map(|i| i + 1);
    Ok(TrialOutcome {
        trial_index,
        window_flags: window_flags.to_vec(),
        correct: !false_positive && first_tp_window.is_some(),
        first_tp_window,
        detection_time_s: None,
    })
}

/// Center of the first true-positive window, relative to onset.
pub fn detection_time(outcome: &TrialOutcome, spec: &WindowSpec) -> Result<f64> {
    match (outcome.correct, outcome.first_tp_window) {
        (true, Some(w)) => Ok(spec.center_of(w)),
        _ => Err(Error::IncorrectTrial(outcome.trial_index)),
    }
}

impl TrialOutcome {
    /// Fills `detection_time_s` for correct trials.
    pub fn with_detection_time(mut self, spec: &WindowSpec) -> Self {
        self.detection_time_s = detection_time(&self, spec).ok();
        self
    }
}

pub fn trial_accuracy_pct(outcomes: &[TrialOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    100.0 * outcomes.iter().filter(|o| o.correct).count() as f64 / outcomes.len() as f64
}

/// Mean detection time over correct trials.
pub fn mean_detection_time(outcomes: &[TrialOutcome]) -> Option<f64> {
    let times: Vec<f64> = outcomes.iter().filter_map(|o| o.detection_time_s).collect();
    (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(on: &[usize]) -> Vec<bool> {
        (1..=41).map(|i| on.contains(&i)).collect()
    }

    #[test]
    fn truth_table_examples() {
        let labels = default_labels(41, 8);
        assert!(!trial_correctness(0, &flags(&[]), &labels).unwrap().correct);
        assert!(!trial_correctness(0, &flags(&[12]), &labels).unwrap().correct);
        assert!(!trial_correctness(0, &flags(&[12, 40]), &labels).unwrap().correct);
        let o = trial_correctness(0, &flags(&[35, 40]), &labels).unwrap();
        assert!(o.correct);
        assert_eq!(o.first_tp_window, Some(35));
    }

    #[test]
    fn detection_times_use_window_centers() {
        let spec = WindowSpec::default();
        let labels = default_labels(41, 8);
        let o = trial_correctness(3, &flags(&[41]), &labels).unwrap();
        assert_eq!(detection_time(&o, &spec).unwrap(), -0.5);
        let o = trial_correctness(3, &flags(&[34, 41]), &labels).unwrap();
        assert_eq!(detection_time(&o, &spec).unwrap(), -1.375);
        let bad = trial_correctness(3, &flags(&[1, 34]), &labels).unwrap();
        assert!(matches!(detection_time(&bad, &spec), Err(Error::IncorrectTrial(3))));
    }

    #[test]
    fn window_count_must_match() {
        assert!(trial_correctness(0, &[true; 40], &default_labels(41, 8)).is_err());
    }

    #[test]
    fn accuracy_two_ways() {
        let labels = default_labels(41, 8);
        let os: Vec<_> = [&[35][..], &[], &[2, 36], &[41]]
            .iter()
            .map(|f| trial_correctness(0, &flags(f), &labels).unwrap().with_detection_time(&WindowSpec::default()))
            .collect();
        assert_eq!(trial_accuracy_pct(&os), 50.0);
        assert_eq!(mean_detection_time(&os), Some((-1.25 + -0.5) / 2.0));
    }
}
