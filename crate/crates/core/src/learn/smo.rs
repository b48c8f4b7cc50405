//! Sequential minimal optimization for the soft-margin SVM dual
//!
//! ```text
//! min ½ αᵀQα − eᵀα   s.t.  0 ≤ αᵢ ≤ C,  yᵀα = 0,   Qᵢⱼ = yᵢyⱼK(xᵢ, xⱼ)
//! ```
//!
//! with second-order working-set selection. Stops when the maximal
//! violating pair gap m(α) − M(α) drops below `eps`.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::kernel::KernelRows;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoConfig {
    pub eps: f64,
    pub max_iterations: usize,
}

impl Default for SmoConfig {
    fn default() -> Self {
        Self { eps: 1e-3, max_iterations: 10_000_000 }
    }
}

pub(crate) struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Dual objective (to maximize) after each iteration, if requested.
    pub objective_log: Vec<f64>,
}

fn dual_objective(alpha: &[f64], g: &[f64]) -> f64 {
    // With G = Qα − e:  ½αᵀQα − eᵀα = ½ Σ αᵢ(Gᵢ − 1).
    -0.5 * alpha.iter().zip(g).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
}

pub(crate) fn solve(q: &mut dyn KernelRows, y: &[f64], c: f64, cfg: &SmoConfig, log_objective: bool) -> SmoSolution {
    let n = q.len();
    let diag: Vec<f64> = (0..n).map(|i| q.diag(i)).collect();
    let mut alpha = vec![0.0; n];
    let mut g = vec![-1.0; n];
    let (mut ki, mut kj) = (vec![0.0; n], vec![0.0; n]);
    let mut objective_log = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    while iterations < cfg.max_iterations {
        let mut gmax = f64::NEG_INFINITY;
        let mut sel_i = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t]) && -y[t] * g[t] > gmax {
                gmax = -y[t] * g[t];
                sel_i = t;
            }
        }
        if sel_i == usize::MAX {
            converged = true;
            break;
        }
        let i = sel_i;
        q.row(i, &mut ki);

        let mut gmax2 = f64::NEG_INFINITY;
        let mut sel_j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = y[t] * g[t];
            if v > gmax2 {
                gmax2 = v;
            }
            let grad_diff = gmax + v;
            if grad_diff > 0.0 {
                let mut quad = diag[i] + diag[t] - 2.0 * ki[t];
                if quad <= 0.0 {
                    quad = TAU;
                }
                let obj = -grad_diff * grad_diff / quad;
                if obj < best {
                    best = obj;
                    sel_j = t;
                }
            }
        }
        if gmax + gmax2 < cfg.eps || sel_j == usize::MAX {
            converged = true;
            break;
        }
        let j = sel_j;
        q.row(j, &mut kj);
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = diag[i] + diag[j] - 2.0 * ki[j];
        if quad <= 0.0 {
            quad = TAU;
        }
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let delta = (-g[i] - g[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let delta = (g[i] - g[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (di, dj) = ((ai - old_i) * y[i], (aj - old_j) * y[j]);
        for t in 0..n {
            g[t] += y[t] * (ki[t] * di + kj[t] * dj);
        }
        if log_objective {
            objective_log.push(dual_objective(&alpha, &g));
        }
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * g[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if (at_upper && y[t] < 0.0) || (at_lower && y[t] > 0.0) {
            ub = ub.min(yg);
        } else if at_upper || at_lower {
            lb = lb.max(yg);
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    SmoSolution { alpha, rho, iterations, converged, objective_log }
}
