use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use super::kernel::{rbf, Dense, KernelSpace, SubsetRows, DENSE_LIMIT};
use super::par::par_map;
use super::platt::{sigmoid_predict, sigmoid_train};
use super::smo::{self, SmoConfig};
use crate::{Error, Result};

/// Trained RBF support-vector classifier with a sigmoid probability map.
///
/// The decision value is `Σ coefᵢ·K(svᵢ, x) + bias` with `coefᵢ = αᵢyᵢ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub platt_a: f64,
    pub platt_b: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, |v| v.len())
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        Ok(self
            .support_vectors
            .iter()
            .zip(&self.dual_coefficients)
            .map(|(sv, c)| c * rbf(sv, x, self.gamma))
            .sum::<f64>()
            + self.bias)
    }

    pub fn decision_values(&self, xs: &[&[f64]]) -> Result<Vec<f64>> {
        par_map(xs, |x| self.decision_value(x)).into_iter().collect()
    }

    pub fn probability(&self, decision: f64) -> f64 {
        sigmoid_predict(decision, self.platt_a, self.platt_b)
    }
}

pub fn svm_predict_proba(m: &SvmModel, xs: &[&[f64]]) -> Result<Vec<f64>> {
    Ok(m.decision_values(xs)?.into_iter().map(|d| m.probability(d)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub gamma: f64,
    pub c: f64,
    pub smo: SmoConfig,
    /// Contiguous folds for the internal Platt split; 0 skips calibration
    /// and leaves the map at A = −1, B = 0.
    pub platt_folds: usize,
    /// Record the dual objective after every iteration.
    pub log_objective: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { gamma: 1.0, c: 1.0, smo: SmoConfig::default(), platt_folds: 3, log_objective: false }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainStats {
    pub iterations: usize,
    pub converged: bool,
    pub objective_log: Vec<f64>,
    /// αᵢ for every training example, in input order.
    pub alpha: Vec<f64>,
}

/// Solver output on a subset of a kernel space, positions global.
pub(crate) struct Fitted {
    pub sv: Vec<usize>,
    pub coef: Vec<f64>,
    pub rho: f64,
    pub stats: TrainStats,
}

impl Fitted {
    pub(crate) fn decision(&self, space: &KernelSpace<'_>, target: usize) -> f64 {
        self.sv.iter().zip(&self.coef).map(|(&s, c)| c * space.k(s, target)).sum::<f64>() - self.rho
    }

    pub(crate) fn into_model(self, space: &KernelSpace<'_>, c: f64, platt: (f64, f64)) -> SvmModel {
        SvmModel {
            support_vectors: self.sv.iter().map(|&s| space.x[s].to_vec()).collect(),
            dual_coefficients: self.coef,
            bias: -self.rho,
            gamma: space.gamma,
            c,
            platt_a: platt.0,
            platt_b: platt.1,
            converged: self.stats.converged,
            iterations: self.stats.iterations,
        }
    }
}

pub(crate) fn fit_subset(
    space: &KernelSpace<'_>,
    idx: &[usize],
    y: &[f64],
    c: f64,
    smo_cfg: &SmoConfig,
    log_objective: bool,
) -> Fitted {
    let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut rows = SubsetRows::new(*space, idx);
    let sol = smo::solve(&mut rows, &ys, c, smo_cfg, log_objective);
    let (sv, coef) = idx
        .iter()
        .zip(sol.alpha.iter().zip(&ys))
        .filter(|(_, (a, _))| **a > 0.0)
        .map(|(&i, (a, yi))| (i, a * yi))
        .unzip();
    Fitted {
        sv,
        coef,
        rho: sol.rho,
        stats: TrainStats {
            iterations: sol.iterations,
            converged: sol.converged,
            objective_log: sol.objective_log,
            alpha: sol.alpha,
        },
    }
}

/// Platt parameters from held-out decision values over `folds` (ranges of
/// positions within `idx`). A fold whose complement is single-class is
/// scored by `full`. A decreasing fit is flattened to the base rate.
pub(crate) fn fit_platt(
    space: &KernelSpace<'_>,
    idx: &[usize],
    y: &[f64],
    c: f64,
    smo_cfg: &SmoConfig,
    folds: &[Range<usize>],
    full: &Fitted,
) -> (f64, f64) {
    let per_fold = par_map(folds, |r| {
        let train: Vec<usize> = idx[..r.start].iter().chain(&idx[r.end..]).copied().collect();
        let has_both = train.iter().any(|&i| y[i] > 0.0) && train.iter().any(|&i| y[i] < 0.0);
        let model = has_both.then(|| fit_subset(space, &train, y, c, smo_cfg, false));
        idx[r.clone()]
            .iter()
            .map(|&t| model.as_ref().unwrap_or(full).decision(space, t))
            .collect::<Vec<f64>>()
    });
    let dec: Vec<f64> = per_fold.concat();
    let pos: Vec<bool> = folds.iter().flat_map(|r| idx[r.clone()].iter().map(|&i| y[i] > 0.0)).collect();
    let (a, b) = sigmoid_train(&dec, &pos);
    if a > 0.0 {
        let n1 = pos.iter().filter(|&&p| p).count() as f64;
        let n0 = pos.len() as f64 - n1;
        (0.0, libm::log((n0 + 1.0) / (n1 + 1.0)))
    } else {
        (a, b)
    }
}

/// Splits `0..n` into `k` contiguous ranges whose sizes differ by at most one,
/// larger ranges first.
pub fn contiguous_ranges(n: usize, k: usize) -> Vec<Range<usize>> {
    let k = k.min(n).max(1);
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    (0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

pub(crate) fn check_training_data(x: &[&[f64]], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), found: y.len() });
    }
    let dim = x.first().ok_or(Error::EmptyInput("no training examples"))?.len();
    if let Some(v) = x.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
    }
    if x.iter().any(|v| v.iter().any(|f| !f.is_finite())) {
        return Err(Error::NonFiniteFeatures);
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidConfig("labels must be +1 or -1".into()));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Trains with the default solver settings and a 3-fold Platt split.
pub fn svm_train(x: &[&[f64]], y: &[f64], gamma: f64, c: f64) -> Result<SvmModel> {
    svm_train_with(x, y, &SvmParams { gamma, c, ..Default::default() }).map(|(m, _)| m)
}

pub fn svm_train_with(x: &[&[f64]], y: &[f64], params: &SvmParams) -> Result<(SvmModel, TrainStats)> {
    check_training_data(x, y)?;
    if !(params.gamma > 0.0 && params.c > 0.0) {
        return Err(Error::InvalidConfig(alloc::format!("gamma {} and C {} must be positive", params.gamma, params.c)));
    }
    let gram = (x.len() <= DENSE_LIMIT).then(|| Dense::rbf_from_dists(&Dense::sq_dists(x), params.gamma));
    let space = KernelSpace { x, gamma: params.gamma, gram: gram.as_ref() };
    let idx: Vec<usize> = (0..x.len()).collect();
    let full = fit_subset(&space, &idx, y, params.c, &params.smo, params.log_objective);
    let platt = if params.platt_folds >= 2 && x.len() >= params.platt_folds {
        let folds = contiguous_ranges(x.len(), params.platt_folds);
        fit_platt(&space, &idx, y, params.c, &params.smo, &folds, &full)
    } else {
        (-1.0, 0.0)
    };
    let stats = full.stats.clone();
    Ok((full.into_model(&space, params.c, platt), stats))
}
