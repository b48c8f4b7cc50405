use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Two-input Fisher discriminant with Gaussian class posteriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub weights: [f64; 2],
    pub bias: f64,
    /// Means of class 0 (negative) and class 1 (positive).
    pub class_means: [[f64; 2]; 2],
    pub pooled_covariance: [[f64; 2]; 2],
}

/// Relative ridge added to the pooled covariance diagonal.
pub const LDA_RIDGE: f64 = 1e-6;

pub fn lda_train(z: &[[f64; 2]], positive: &[bool]) -> Result<LdaModel> {
    if z.len() != positive.len() {
        return Err(Error::LengthMismatch { expected: z.len(), found: positive.len() });
    }
    if z.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteFeatures);
    }
    let n1 = positive.iter().filter(|&&p| p).count();
    let n0 = z.len() - n1;
    if n0 == 0 || n1 == 0 {
        return Err(Error::SingleClass);
    }
    if n0 < 2 || n1 < 2 {
        return Err(Error::InsufficientData("LDA needs two examples per class".into()));
    }
    let mut means = [[0.0; 2]; 2];
    for (v, &p) in z.iter().zip(positive) {
        let m = &mut means[p as usize];
        m[0] += v[0];
        m[1] += v[1];
    }
    for (m, n) in means.iter_mut().zip([n0, n1]) {
        m[0] /= n as f64;
        m[1] /= n as f64;
    }
    let mut s = [[0.0; 2]; 2];
    for (v, &p) in z.iter().zip(positive) {
        let m = means[p as usize];
        let d = [v[0] - m[0], v[1] - m[1]];
        for r in 0..2 {
            for c in 0..2 {
                s[r][c] += d[r] * d[c];
            }
        }
    }
    let dof = (z.len() - 2) as f64;
    for row in s.iter_mut() {
        for v in row.iter_mut() {
            *v /= dof;
        }
    }
    let ridge = LDA_RIDGE * (s[0][0] + s[1][1]) / 2.0;
    s[0][0] += ridge;
    s[1][1] += ridge;
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    if !(det > 0.0) {
        return Err(Error::InsufficientData("singular pooled covariance".into()));
    }
    let inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
    let dm = [means[1][0] - means[0][0], means[1][1] - means[0][1]];
    let w = [inv[0][0] * dm[0] + inv[0][1] * dm[1], inv[1][0] * dm[0] + inv[1][1] * dm[1]];
    let mid = [(means[0][0] + means[1][0]) / 2.0, (means[0][1] + means[1][1]) / 2.0];
    let bias = -(w[0] * mid[0] + w[1] * mid[1]) + libm::log(n1 as f64 / n0 as f64);
    Ok(LdaModel { weights: w, bias, class_means: means, pooled_covariance: s })
}

impl LdaModel {
    pub fn discriminant(&self, z: [f64; 2]) -> f64 {
        self.weights[0] * z[0] + self.weights[1] * z[1] + self.bias
    }

    /// Posterior probability of the positive class.
    pub fn predict_proba(&self, z: [f64; 2]) -> f64 {
        super::platt::sigmoid_predict(self.discriminant(z), -1.0, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn diamond(center: f64) -> Vec<[f64; 2]> {
        let d = 0.05;
        [[d, 0.0], [-d, 0.0], [0.0, d], [0.0, -d]].iter().map(|o| [center + o[0], center + o[1]]).collect()
    }

    #[test]
    fn symmetric_classes_weight_both_inputs_equally() {
        let mut z = diamond(0.2);
        z.extend(diamond(0.8));
        let y: Vec<bool> = (0..8).map(|i| i >= 4).collect();
        let m = lda_train(&z, &y).unwrap();
        assert!(m.weights[0] > 0.0);
        assert!((m.weights[0] - m.weights[1]).abs() < 1e-9 * m.weights[0]);
        assert!(m.predict_proba([0.8, 0.8]) > 0.99);
        let swapped: Vec<bool> = y.iter().map(|v| !v).collect();
        let s = lda_train(&z, &swapped).unwrap();
        assert!((s.weights[0] + m.weights[0]).abs() < 1e-9 * m.weights[0]);
    }

    #[test]
    fn single_class_or_tiny_class() {
        assert!(matches!(lda_train(&diamond(0.1), &[true; 4]), Err(Error::SingleClass)));
        assert!(lda_train(&diamond(0.1), &[true, false, false, false]).is_err());
    }
}
