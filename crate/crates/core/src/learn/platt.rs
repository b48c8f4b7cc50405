//! Sigmoid calibration P(y = 1 | f) = 1 / (1 + exp(A·f + B)), fitted by
//! Newton's method with backtracking on regularized targets.

use alloc::vec::Vec;

pub(crate) fn sigmoid_predict(f: f64, a: f64, b: f64) -> f64 {
    let z = a * f + b;
    // Evaluated on the side that cannot overflow.
    if z >= 0.0 {
        let e = libm::exp(-z);
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + libm::exp(z))
    }
}

/// Returns (A, B). `positive[i]` marks class +1.
pub(crate) fn sigmoid_train(dec: &[f64], positive: &[bool]) -> (f64, f64) {
    let prior1 = positive.iter().filter(|&&p| p).count() as f64;
    let prior0 = dec.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();

    const MAX_ITER: usize = 100;
    const MIN_STEP: f64 = 1e-10;
    const SIGMA: f64 = 1e-12;
    const EPS: f64 = 1e-5;

    let fval_at = |a: f64, b: f64| -> f64 {
        dec.iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + libm::log1p(libm::exp(-z))
                } else {
                    (ti - 1.0) * z + libm::log1p(libm::exp(z))
                }
            })
            .sum()
    };

    let mut a = 0.0;
    let mut b = libm::log((prior0 + 1.0) / (prior1 + 1.0));
    let mut fval = fval_at(a, b);
    for _ in 0..MAX_ITER {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
        for (&f, &ti) in dec.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = libm::exp(-z);
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = libm::exp(z);
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < EPS && g2.abs() < EPS {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = fval_at(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            break;
        }
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_at_zero_is_half() {
        assert_eq!(sigmoid_predict(0.0, -1.0, 0.0), 0.5);
        assert!(sigmoid_predict(1e6, -1.0, 0.0) > 0.999);
        assert!(sigmoid_predict(-1e6, -1.0, 0.0) < 1e-3);
    }

    #[test]
    fn separable_scores_give_increasing_sigmoid() {
        let dec: Vec<f64> = (0..40).map(|i| (i as f64 - 20.0) / 10.0).collect();
        let pos: Vec<bool> = (0..40).map(|i| i >= 20).collect();
        let (a, _) = sigmoid_train(&dec, &pos);
        assert!(a < 0.0);
        assert!(sigmoid_predict(1.5, a, 0.0) > 0.5);
    }

    #[test]
    fn overlapping_scores_track_base_rate() {
        // Scores carry no information: the fit falls back to the prior.
        let dec: Vec<f64> = (0..100).map(|i| (i % 10) as f64).collect();
        let pos: Vec<bool> = (0..100).map(|i| i < 20).collect();
        let (a, b) = sigmoid_train(&dec, &pos);
        let p = sigmoid_predict(4.5, a, b);
        assert!((p - 0.2).abs() < 0.05, "{p}");
    }
}
