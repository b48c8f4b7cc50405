use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChanceMode {
    /// Inverse binomial bound under the majority-class rate.
    Binomial,
    /// (1 − α) quantile of accuracy over label permutations of fixed predictions.
    Permutation,
}

fn ln_choose(n: u64, k: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

/// Smallest accuracy (percent) a classifier must reach over `n_windows`
/// so that a label-independent classifier reaches it with probability at most
/// `alpha`. The null accuracy rate is the majority-class proportion.
///
/// Returns 100 when no accuracy is significant at this sample size.
pub fn empirical_chance_level(n_windows: u64, class_ratio: f64, alpha: f64) -> Result<f64> {
    if n_windows == 0 {
        return Err(Error::EmptyInput("no windows"));
    }
    if !(0.0..=1.0).contains(&class_ratio) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(alloc::format!("class ratio {class_ratio} / alpha {alpha}")));
    }
    let p = class_ratio.max(1.0 - class_ratio);
    if p >= 1.0 {
        return Ok(100.0);
    }
    let (lp, lq) = (libm::log(p), libm::log1p(-p));
    let mut tail = 0.0;
    let mut k = n_windows;
    // Walk down from n while P(X >= k) stays within alpha.
    loop {
        let mass = libm::exp(ln_choose(n_windows, k) + k as f64 * lp + (n_windows - k) as f64 * lq);
        if tail + mass > alpha {
            break;
        }
        tail += mass;
        if k == 0 {
            return Ok(0.0);
        }
        k -= 1;
    }
    Ok(100.0 * ((k + 1).min(n_windows)) as f64 / n_windows as f64)
}

/// Permutation chance level for fixed window predictions.
pub fn permutation_chance_level(
    predicted: &[bool],
    actual: &[bool],
    n_permutations: usize,
    alpha: f64,
    seed: u64,
) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch { expected: actual.len(), found: predicted.len() });
    }
    if predicted.is_empty() || n_permutations == 0 {
        return Err(Error::EmptyInput("no windows or permutations"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels = actual.to_vec();
    let mut accs: Vec<f64> = (0..n_permutations)
        .map(|_| {
            labels.shuffle(&mut rng);
            let hits = predicted.iter().zip(&labels).filter(|(p, l)| p == l).count();
            100.0 * hits as f64 / predicted.len() as f64
        })
        .collect();
    accs.sort_by(f64::total_cmp);
    let idx = libm::ceil((1.0 - alpha) * n_permutations as f64) as usize;
    Ok(accs[idx.clamp(1, n_permutations) - 1])
}
