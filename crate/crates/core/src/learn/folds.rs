use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use super::svm::contiguous_ranges;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterFold {
    pub index: usize,
    /// Trial positions, chronological.
    pub test: Vec<usize>,
    pub train: Vec<usize>,
    /// Contiguous blocks of `train` for the inner loop.
    pub inner: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub n_trials: usize,
    pub outer_blocks: Vec<Range<usize>>,
    pub strict_forward: bool,
    /// Folds with a usable training pool. Under `strict_forward` the
    /// earliest folds have too little past data and are left out.
    pub folds: Vec<OuterFold>,
}

/// 5×5 nested chronological plan.
pub fn make_fold_plan(n_trials: usize) -> Result<FoldPlan> {
    make_fold_plan_with(n_trials, 5, 5, false)
}

/// Splits `pool` into `k` contiguous blocks in pool order.
pub fn inner_blocks(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    contiguous_ranges(pool.len(), k).into_iter().map(|r| pool[r].to_vec()).collect()
}

pub fn make_fold_plan_with(n_trials: usize, outer: usize, inner: usize, strict_forward: bool) -> Result<FoldPlan> {
    if outer < 2 || inner < 2 {
        return Err(Error::InvalidConfig(alloc::format!("need at least 2 folds, got {outer}x{inner}")));
    }
    let min = 2 * outer.max(inner);
    if n_trials < min {
        return Err(Error::TooFewTrials { n: n_trials, min });
    }
    let outer_blocks = contiguous_ranges(n_trials, outer);
    let folds: Vec<OuterFold> = outer_blocks
        .iter()
        .enumerate()
        .filter_map(|(k, test)| {
            let train: Vec<usize> = if strict_forward {
                (0..test.start).collect()
            } else {
                (0..n_trials).filter(|t| !test.contains(t)).collect()
            };
            (train.len() >= inner).then(|| OuterFold {
                index: k,
                test: test.clone().collect(),
                inner: inner_blocks(&train, inner),
                train,
            })
        })
        .collect();
    if folds.is_empty() {
        return Err(Error::InsufficientData("no outer fold has enough training trials".into()));
    }
    Ok(FoldPlan { n_trials, outer_blocks, strict_forward, folds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sizes(v: &[Vec<usize>]) -> Vec<usize> {
        v.iter().map(|b| b.len()).collect()
    }

    #[test]
    fn hundred_trials() {
        let p = make_fold_plan(100).unwrap();
        assert_eq!(p.folds.len(), 5);
        for f in &p.folds {
            assert_eq!(f.test.len(), 20);
            assert_eq!(sizes(&f.inner), [16; 5]);
        }
        assert_eq!(p.folds[2].test, (40..60).collect::<Vec<_>>());
        assert_eq!(p.folds[2].inner[2], (32..40).chain(60..68).collect::<Vec<_>>());
    }

    #[test]
    fn ninety_six_trials() {
        let p = make_fold_plan(96).unwrap();
        let outer: Vec<usize> = p.outer_blocks.iter().map(|r| r.len()).collect();
        assert_eq!(outer, [20, 19, 19, 19, 19]);
    }

    #[test]
    fn ten_trials_and_too_few() {
        let p = make_fold_plan(10).unwrap();
        assert!(p.outer_blocks.iter().all(|r| r.len() == 2));
        assert!(p.folds.iter().all(|f| sizes(&f.inner) == [2, 2, 2, 1, 1]));
        assert!(matches!(make_fold_plan(9), Err(Error::TooFewTrials { .. })));
    }

    #[test]
    fn strict_forward_trains_on_the_past_only() {
        let p = make_fold_plan_with(100, 5, 5, true).unwrap();
        assert_eq!(p.folds.iter().map(|f| f.index).collect::<Vec<_>>(), [1, 2, 3, 4]);
        for f in &p.folds {
            assert!(f.train.iter().all(|&t| t < f.test[0]));
        }
    }
}
