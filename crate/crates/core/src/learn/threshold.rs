use alloc::vec::Vec;

use crate::{Error, Result};

/// Decision threshold maximizing the number of correct trials on validation
/// data, where a window is positive iff its score is `>=` the threshold.
///
/// Candidates are the distinct scores plus 0 and 1. Ties go to the higher
/// threshold.
pub fn select_threshold(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { expected: labels.len(), found: scores.len() });
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput("no validation trials"));
    }
    // A trial is correct at θ iff max negative score < θ <= max positive score.
    let mut bounds = Vec::with_capacity(scores.len());
    let mut candidates = Vec::new();
    for (s, l) in scores.iter().zip(labels) {
        if s.len() != l.len() {
            return Err(Error::LengthMismatch { expected: l.len(), found: s.len() });
        }
        if s.iter().any(|v| v.is_nan()) {
            return Err(Error::NonFiniteFeatures);
        }
        let max_of = |want: bool| {
            s.iter().zip(l).filter(|(_, &li)| li == want).map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max)
        };
        bounds.push((max_of(false), max_of(true)));
        candidates.extend_from_slice(s);
    }
    candidates.extend([0.0, 1.0]);
    candidates.sort_by(|a, b| b.total_cmp(a));
    candidates.dedup();

    let mut best = (0usize, candidates[0]);
    for (k, &theta) in candidates.iter().enumerate() {
        let correct = bounds.iter().filter(|(neg, pos)| *neg < theta && theta <= *pos).count();
        if k == 0 || correct > best.0 {
            best = (correct, theta);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn clean_separation_picks_the_upper_end() {
        let labels: Vec<bool> = (0..41).map(|i| i >= 33).collect();
        let scores: Vec<f64> = labels.iter().map(|&l| if l { 0.9 } else { 0.1 }).collect();
        let t = select_threshold(&[scores.clone(), scores], &[labels.clone(), labels]).unwrap();
        assert_eq!(t, 0.9);
    }

    #[test]
    fn constant_scores_prefer_all_negative() {
        let labels = vec![vec![false, false, true]];
        // Nothing is ever correct, so the highest candidate wins.
        assert_eq!(select_threshold(&[vec![0.4; 3]], &labels).unwrap(), 1.0);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(select_threshold(&[], &[]).is_err());
    }
}
