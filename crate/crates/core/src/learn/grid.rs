use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::kernel::{Dense, KernelSpace, DENSE_LIMIT};
use super::par::par_map;
use super::smo::SmoConfig;
use super::svm::{check_training_data, fit_subset};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid {
    pub gammas: Vec<f64>,
    pub cs: Vec<f64>,
}

/// `n` points evenly spaced in log2 between `2^lo` and `2^hi`.
pub fn log2_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![libm::exp2(lo)];
    }
    (0..n).map(|i| libm::exp2(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect()
}

impl Default for Grid {
    fn default() -> Self {
        Self { gammas: log2_grid(-5.0, 5.0, 5), cs: log2_grid(-5.0, 5.0, 5) }
    }
}

impl Grid {
    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() || self.cs.is_empty() {
            return Err(Error::InvalidConfig("empty hyperparameter grid".into()));
        }
        if self.gammas.iter().chain(&self.cs).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("grid values must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub gamma: f64,
    pub c: f64,
    /// Mean validation window accuracy over the inner folds.
    pub accuracy: f64,
}

/// Highest accuracy; ties go to smaller C, then smaller γ.
pub fn select_best(cells: &[GridCell]) -> Option<GridCell> {
    cells.iter().copied().reduce(|best, cell| {
        let better = cell.accuracy > best.accuracy
            || (cell.accuracy == best.accuracy && (cell.c < best.c || (cell.c == best.c && cell.gamma < best.gamma)));
        if better {
            cell
        } else {
            best
        }
    })
}

/// Examples grouped into equally sized consecutive blocks (the windows of a trial).
pub(crate) struct ViewData<'a> {
    pub x: Vec<&'a [f64]>,
    pub y: Vec<f64>,
    pub per_group: usize,
    pub dists: Option<Dense>,
}

impl<'a> ViewData<'a> {
    pub(crate) fn new(x: Vec<&'a [f64]>, y: Vec<f64>, per_group: usize) -> Self {
        let dists = (x.len() <= DENSE_LIMIT).then(|| Dense::sq_dists(&x));
        Self { x, y, per_group, dists }
    }

    pub(crate) fn examples(&self, groups: &[usize]) -> Vec<usize> {
        groups.iter().flat_map(|&g| g * self.per_group..(g + 1) * self.per_group).collect()
    }

    pub(crate) fn gram(&self, gamma: f64) -> Option<Dense> {
        self.dists.as_ref().map(|d| Dense::rbf_from_dists(d, gamma))
    }

    pub(crate) fn space<'s>(&'s self, gamma: f64, gram: Option<&'s Dense>) -> KernelSpace<'s> {
        KernelSpace { x: &self.x, gamma, gram }
    }
}

/// A training pool of groups and its inner validation blocks.
pub(crate) struct PoolTask<'t> {
    pub pool: &'t [usize],
    pub inner: &'t [Vec<usize>],
}

/// Grid cells for each task, γ-major.
pub(crate) fn grid_scores(view: &ViewData<'_>, tasks: &[PoolTask<'_>], grid: &Grid, smo: &SmoConfig) -> Result<Vec<Vec<GridCell>>> {
    grid.validate()?;
    let mut out: Vec<Vec<GridCell>> = tasks.iter().map(|_| Vec::new()).collect();
    for &gamma in &grid.gammas {
        let gram = view.gram(gamma);
        let space = view.space(gamma, gram.as_ref());
        let mut jobs = Vec::new();
        for (t, task) in tasks.iter().enumerate() {
            for (ci, _) in grid.cs.iter().enumerate() {
                for f in 0..task.inner.len() {
                    jobs.push((t, ci, f));
                }
            }
        }
        let accs = par_map(&jobs, |&(t, ci, f)| {
            let task = &tasks[t];
            let val = view.examples(&task.inner[f]);
            let train_groups: Vec<usize> = task.pool.iter().copied().filter(|g| !task.inner[f].contains(g)).collect();
            let train = view.examples(&train_groups);
            let has_both = train.iter().any(|&i| view.y[i] > 0.0) && train.iter().any(|&i| view.y[i] < 0.0);
            if !has_both {
                return Err(Error::SingleClass);
            }
            let fit = fit_subset(&space, &train, &view.y, grid.cs[ci], smo, false);
            let hits = val.iter().filter(|&&v| (fit.decision(&space, v) > 0.0) == (view.y[v] > 0.0)).count();
            Ok(hits as f64 / val.len() as f64)
        });
        let mut accs = accs.into_iter();
        for (t, task) in tasks.iter().enumerate() {
            for &c in &grid.cs {
                let mut sum = 0.0;
                for _ in 0..task.inner.len() {
                    sum += accs.next().unwrap_or(Err(Error::EmptyInput("grid job")))?;
                }
                out[t].push(GridCell { gamma, c, accuracy: sum / task.inner.len() as f64 });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: GridCell,
    pub cells: Vec<GridCell>,
}

/// Grid search over examples: each fold in `validation_folds` is held out in
/// turn and the model is trained on all remaining examples.
pub fn grid_search(x: &[&[f64]], y: &[f64], validation_folds: &[Vec<usize>], grid: &Grid, smo: &SmoConfig) -> Result<GridResult> {
    check_training_data(x, y)?;
    if validation_folds.is_empty() || validation_folds.iter().any(|f| f.is_empty() || f.iter().any(|&i| i >= x.len())) {
        return Err(Error::InvalidConfig("validation folds must be non-empty and in range".into()));
    }
    let view = ViewData::new(x.to_vec(), y.to_vec(), 1);
    let pool: Vec<usize> = (0..x.len()).collect();
    let cells = grid_scores(&view, &[PoolTask { pool: &pool, inner: validation_folds }], grid, smo)?.remove(0);
    let best = select_best(&cells).ok_or(Error::EmptyInput("empty grid"))?;
    Ok(GridResult { best, cells })
}
