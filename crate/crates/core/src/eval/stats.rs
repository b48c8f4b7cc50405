use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest sample size that uses the exact null distribution.
pub const WILCOXON_EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// min(W+, W−).
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    pub exact: bool,
}

/// Average ranks (1-based) of `|d|`, ties sharing the mean rank.
fn ranks(abs: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..abs.len()).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut r = vec![0.0; abs.len()];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        tie_sizes.push(j - i + 1);
        i = j + 1;
    }
    (r, tie_sizes)
}

/// Wilcoxon signed-rank test on paired samples, zero differences dropped.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), found: y.len() });
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteFeatures);
    }
    if d.is_empty() {
        return Err(Error::DegeneratePairs);
    }
    let n = d.len();
    if n < 5 {
        return Err(Error::TooFewTrials { n, min: 5 });
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (r, tie_sizes) = ranks(&abs);
    let w_plus: f64 = d.iter().zip(&r).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let statistic = w_plus.min(total - w_plus);

    if n <= WILCOXON_EXACT_MAX_N {
        // Doubled ranks are integers even with ties.
        let dr: Vec<usize> = r.iter().map(|v| libm::round(2.0 * v) as usize).collect();
        let max: usize = dr.iter().sum();
        let mut counts = vec![0.0f64; max + 1];
        counts[0] = 1.0;
        for &v in &dr {
            for s in (v..=max).rev() {
                counts[s] += counts[s - v];
            }
        }
        let all = libm::pow(2.0, n as f64);
        let w2 = libm::round(2.0 * w_plus) as usize;
        let lower: f64 = counts[..=w2].iter().sum::<f64>() / all;
        let upper: f64 = counts[w2..].iter().sum::<f64>() / all;
        let p_value = (2.0 * lower.min(upper)).min(1.0);
        return Ok(WilcoxonResult { statistic, p_value, n, exact: true });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    if var <= 0.0 {
        return Err(Error::DegeneratePairs);
    }
    let diff = w_plus - mean;
    let corrected = (diff.abs() - 0.5).max(0.0);
    let z = corrected / libm::sqrt(var);
    let p_value = libm::erfc(z / core::f64::consts::SQRT_2).min(1.0);
    Ok(WilcoxonResult { statistic, p_value, n, exact: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolmResult {
    pub adjusted_p: f64,
    pub rejected: bool,
}

/// Bonferroni-Holm step-down adjustment, results in input order.
pub fn bonferroni_holm(p_values: &[f64], alpha: f64) -> Result<Vec<HolmResult>> {
    if let Some(&p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidProbability(p));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut out = vec![HolmResult { adjusted_p: 0.0, rejected: false }; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        running = running.max(((m - rank) as f64 * p_values[i]).min(1.0));
        out[i] = HolmResult { adjusted_p: running, rejected: running <= alpha };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_shift_exact_p() {
        let y: Vec<f64> = (0..10).map(|i| i as f64 * 1.7).collect();
        let x: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + 1.0 + i as f64 * 0.1).collect();
        let r = wilcoxon_signed_rank(&x, &y).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.exact);
        assert!((r.p_value - 2.0 / 1024.0).abs() < 1e-12);
    }

    #[test]
    fn identical_samples_are_degenerate() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert!(matches!(wilcoxon_signed_rank(&x, &x), Err(Error::DegeneratePairs)));
    }

    #[test]
    fn symmetric_differences_are_not_significant() {
        let x = [1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0];
        let r = wilcoxon_signed_rank(&x, &[0.0; 8]).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.statistic, 18.0);
    }

    #[test]
    fn large_sample_uses_normal_approximation() {
        let x: Vec<f64> = (0..40).map(|i| if i % 4 == 0 { -(i as f64) - 1.0 } else { i as f64 + 1.0 }).collect();
        let r = wilcoxon_signed_rank(&x, &[0.0; 40]).unwrap();
        assert!(!r.exact);
        assert!(r.p_value > 0.0 && r.p_value < 0.05);
    }

    #[test]
    fn holm_hand_stepped() {
        let r = bonferroni_holm(&[0.01, 0.04, 0.03], 0.05).unwrap();
        let adj: Vec<f64> = r.iter().map(|h| h.adjusted_p).collect();
        for (a, e) in adj.iter().zip([0.03, 0.06, 0.06]) {
            assert!((a - e).abs() < 1e-12);
        }
        assert_eq!(r.iter().map(|h| h.rejected).collect::<Vec<_>>(), [true, false, false]);
    }

    #[test]
    fn holm_edge_cases() {
        assert_eq!(bonferroni_holm(&[0.2], 0.05).unwrap()[0].adjusted_p, 0.2);
        assert!(bonferroni_holm(&[0.0, 0.0, 0.0], 0.05).unwrap().iter().all(|h| h.rejected));
        assert!(matches!(bonferroni_holm(&[1.5], 0.05), Err(Error::InvalidProbability(_))));
    }
}
