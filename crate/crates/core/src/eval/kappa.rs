use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// 2×2 confusion counts with "premovement" as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fn_: u64,
    pub fp: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn from_predictions(predicted: &[bool], actual: &[bool]) -> Result<Self> {
        if predicted.len() != actual.len() {
            return Err(Error::LengthMismatch { expected: actual.len(), found: predicted.len() });
        }
        let mut c = Confusion::default();
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p, a) {
                (true, true) => c.tp += 1,
                (false, true) => c.fn_ += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fn_ + self.fp + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    pub fn merge(&self, other: &Confusion) -> Confusion {
        Confusion { tp: self.tp + other.tp, fn_: self.fn_ + other.fn_, fp: self.fp + other.fp, tn: self.tn + other.tn }
    }
}

/// Cohen's kappa. When chance agreement is total (one class everywhere) and
/// the observed agreement is too, kappa is 1.
pub fn cohens_kappa(c: &Confusion) -> f64 {
    let n = c.total() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let po = (c.tp + c.tn) as f64 / n;
    let actual_pos = (c.tp + c.fn_) as f64 / n;
    let pred_pos = (c.tp + c.fp) as f64 / n;
    let pe = actual_pos * pred_pos + (1.0 - actual_pos) * (1.0 - pred_pos);
    if pe >= 1.0 {
        return if po >= 1.0 { 1.0 } else { 0.0 };
    }
    (po - pe) / (1.0 - pe)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_example() {
        let c = Confusion { tp: 40, fn_: 10, fp: 20, tn: 30 };
        assert!((cohens_kappa(&c) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn perfect_and_chance() {
        assert_eq!(cohens_kappa(&Confusion { tp: 7, fn_: 0, fp: 0, tn: 3 }), 1.0);
        // Outer product of marginals (0.5, 0.5) × (0.4, 0.6).
        let c = Confusion { tp: 20, fn_: 30, fp: 20, tn: 30 };
        assert!(cohens_kappa(&c).abs() < 1e-12);
    }

    #[test]
    fn one_class_everywhere() {
        assert_eq!(cohens_kappa(&Confusion { tp: 0, fn_: 0, fp: 0, tn: 9 }), 1.0);
    }

    #[test]
    fn counts_from_predictions() {
        let c = Confusion::from_predictions(&[true, false, true, false], &[true, true, false, false]).unwrap();
        assert_eq!(c, Confusion { tp: 1, fn_: 1, fp: 1, tn: 1 });
        assert!(Confusion::from_predictions(&[true], &[]).is_err());
    }
}
