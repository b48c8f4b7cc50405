use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::folds::{inner_blocks, FoldPlan};
use super::grid::{grid_scores, select_best, Grid, GridCell, PoolTask, ViewData};
use super::lda::{lda_train, LdaModel};
use super::par::par_map;
use super::platt::sigmoid_predict;
use super::smo::SmoConfig;
use super::svm::{contiguous_ranges, fit_platt, fit_subset, svm_predict_proba, SvmModel};
use super::threshold::select_threshold;
use crate::eval::TrialPrediction;
use crate::features::{ViewKind, WindowDataset};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Amplitude,
    Phase,
    AmplitudePlusPhase,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Amplitude, ModelKind::Phase, ModelKind::AmplitudePlusPhase];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Amplitude => "amplitude",
            ModelKind::Phase => "phase",
            ModelKind::AmplitudePlusPhase => "amplitude_plus_phase",
        }
    }

    pub fn uses(self, view: ViewKind) -> bool {
        match self {
            ModelKind::Amplitude => view == ViewKind::Amplitude,
            ModelKind::Phase => view == ViewKind::Phase,
            ModelKind::AmplitudePlusPhase => true,
        }
    }
}

impl core::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown model kind '{s}'")))
    }
}

/// A deployable detector: window scores in [0, 1] compared against `threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub kind: ModelKind,
    pub svm_amplitude: Option<SvmModel>,
    pub svm_phase: Option<SvmModel>,
    pub fusion: Option<LdaModel>,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub grid: Grid,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub strict_forward: bool,
    pub smo: SmoConfig,
    pub platt_folds: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { grid: Grid::default(), outer_folds: 5, inner_folds: 5, strict_forward: false, smo: SmoConfig::default(), platt_folds: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Fit,
    Predict,
}

/// Observer of which trials each fitting or prediction step reads.
pub trait AccessAudit: Sync {
    fn record(&self, purpose: Purpose, trial_index: usize);
}

pub struct NoAudit;

impl AccessAudit for NoAudit {
    fn record(&self, _: Purpose, _: usize) {}
}

/// The two feature views of the same trials. Only the views a model kind
/// needs have to be present.
#[derive(Debug, Clone, Copy, Default)]
pub struct Views<'a> {
    pub amplitude: Option<&'a WindowDataset>,
    pub phase: Option<&'a WindowDataset>,
}

impl<'a> Views<'a> {
    pub fn get(&self, view: ViewKind) -> Option<&'a WindowDataset> {
        match view {
            ViewKind::Amplitude => self.amplitude,
            ViewKind::Phase => self.phase,
        }
    }

    fn require(&self, kinds: &[ModelKind]) -> Result<Vec<(ViewKind, &'a WindowDataset)>> {
        let mut out = Vec::new();
        for v in [ViewKind::Amplitude, ViewKind::Phase] {
            if kinds.iter().any(|k| k.uses(v)) {
                let ds = self.get(v).ok_or_else(|| Error::Misaligned(alloc::format!("missing {} view", v.as_str())))?;
                if ds.kind() != v {
                    return Err(Error::Misaligned(alloc::format!("{} dataset passed as {} view", ds.kind().as_str(), v.as_str())));
                }
                out.push((v, ds));
            }
        }
        Ok(out)
    }

    /// Trial indices and per-window labels, checked to agree across views.
    fn aligned(&self, kinds: &[ModelKind]) -> Result<(Vec<usize>, Vec<Vec<bool>>)> {
        let views = self.require(kinds)?;
        let (_, first) = views[0];
        let trials: Vec<usize> = first.trials().iter().map(|t| t.trial_index).collect();
        let labels: Vec<Vec<bool>> =
            first.trials().iter().map(|t| t.windows.iter().map(|w| w.label.is_positive()).collect()).collect();
        for (_, other) in &views[1..] {
            if other.n_trials() != first.n_trials() || other.windows_per_trial() != first.windows_per_trial() {
                return Err(Error::Misaligned("views differ in trial or window count".into()));
            }
            for (t, (ti, lab)) in other.trials().iter().zip(trials.iter().zip(&labels)) {
                let same = t.trial_index == *ti && t.windows.iter().zip(lab).all(|(w, &l)| w.label.is_positive() == l);
                if !same {
                    return Err(Error::Misaligned(alloc::format!("trial {ti} differs between views")));
                }
            }
        }
        Ok((trials, labels))
    }
}

fn view_data(ds: &WindowDataset) -> ViewData<'_> {
    let x = ds.trials().iter().flat_map(|t| t.windows.iter().map(|w| w.values.as_slice())).collect();
    let y = ds
        .trials()
        .iter()
        .flat_map(|t| t.windows.iter().map(|w| if w.label.is_positive() { 1.0 } else { -1.0 }))
        .collect();
    ViewData::new(x, y, ds.windows_per_trial())
}

/// Trial positions for one fit: the pool, its inner blocks, and held-out test trials.
struct Task {
    pool: Vec<usize>,
    inner: Vec<Vec<usize>>,
    test: Vec<usize>,
}

struct ViewFit {
    model: SvmModel,
    selected: GridCell,
    /// Held-out probabilities for every pool trial, in pool order.
    inner_probs: Vec<Vec<f64>>,
    test_probs: Vec<Vec<f64>>,
}

fn chunk(v: Vec<f64>, per: usize) -> Vec<Vec<f64>> {
    v.chunks(per).map(|c| c.to_vec()).collect()
}

fn fit_view(view: &ViewData<'_>, tasks: &[Task], cfg: &TrainConfig) -> Result<Vec<ViewFit>> {
    let pool_tasks: Vec<PoolTask<'_>> = tasks.iter().map(|t| PoolTask { pool: &t.pool, inner: &t.inner }).collect();
    let cells = grid_scores(view, &pool_tasks, &cfg.grid, &cfg.smo)?;
    let best: Vec<GridCell> = cells.iter().map(|c| select_best(c).ok_or(Error::EmptyInput("empty grid"))).collect::<Result<_>>()?;

    let mut gammas: Vec<f64> = best.iter().map(|b| b.gamma).collect();
    gammas.sort_by(f64::total_cmp);
    gammas.dedup();
    let mut fits: Vec<Option<ViewFit>> = tasks.iter().map(|_| None).collect();
    let w = view.per_group;
    for gamma in gammas {
        let gram = view.gram(gamma);
        let space = view.space(gamma, gram.as_ref());
        let chosen: Vec<usize> = (0..tasks.len()).filter(|&t| best[t].gamma == gamma).collect();
        // One job per inner model plus one for the final pool model.
        let jobs: Vec<(usize, Option<usize>)> = chosen
            .iter()
            .flat_map(|&t| (0..tasks[t].inner.len()).map(move |f| (t, Some(f))).chain([(t, None)]))
            .collect();
        let results = par_map(&jobs, |&(t, f)| {
            let task = &tasks[t];
            let c = best[t].c;
            let train_groups: Vec<usize> = match f {
                Some(f) => task.pool.iter().copied().filter(|g| !task.inner[f].contains(g)).collect(),
                None => task.pool.clone(),
            };
            let train = view.examples(&train_groups);
            let fitted = fit_subset(&space, &train, &view.y, c, &cfg.smo, false);
            let platt = if cfg.platt_folds >= 2 && train_groups.len() >= cfg.platt_folds {
                let ranges: Vec<_> = contiguous_ranges(train_groups.len(), cfg.platt_folds)
                    .into_iter()
                    .map(|r| r.start * w..r.end * w)
                    .collect();
                fit_platt(&space, &train, &view.y, c, &cfg.smo, &ranges, &fitted)
            } else {
                (-1.0, 0.0)
            };
            let targets = view.examples(match f {
                Some(f) => &task.inner[f],
                None => &task.test,
            });
            let probs: Vec<f64> =
                targets.iter().map(|&i| sigmoid_predict(fitted.decision(&space, i), platt.0, platt.1)).collect();
            let model = f.is_none().then(|| fitted.into_model(&space, c, platt));
            (probs, model)
        });
        let mut results = results.into_iter();
        for &t in &chosen {
            let mut inner_probs = Vec::new();
            for _ in 0..tasks[t].inner.len() {
                let (p, _) = results.next().ok_or(Error::EmptyInput("fit job"))?;
                inner_probs.extend(chunk(p, w));
            }
            let (p, model) = results.next().ok_or(Error::EmptyInput("fit job"))?;
            fits[t] = Some(ViewFit {
                model: model.ok_or(Error::EmptyInput("final model"))?,
                selected: best[t],
                inner_probs,
                test_probs: chunk(p, w),
            });
        }
    }
    fits.into_iter().map(|f| f.ok_or(Error::EmptyInput("unfitted task"))).collect()
}

fn pairs(a: &[Vec<f64>], p: &[Vec<f64>]) -> Vec<[f64; 2]> {
    a.iter().flatten().zip(p.iter().flatten()).map(|(&x, &y)| [x, y]).collect()
}

/// Builds one detector from per-view fits on a task, plus its test scores.
fn assemble(
    kind: ModelKind,
    amp: Option<&ViewFit>,
    phase: Option<&ViewFit>,
    pool_labels: &[Vec<bool>],
) -> Result<(DetectorModel, Vec<Vec<f64>>)> {
    let missing = || Error::Misaligned(alloc::format!("{kind} needs a missing view"));
    let single = |fit: &ViewFit| -> Result<(f64, Vec<Vec<f64>>)> {
        Ok((select_threshold(&fit.inner_probs, pool_labels)?, fit.test_probs.clone()))
    };
    match kind {
        ModelKind::Amplitude => {
            let fit = amp.ok_or_else(missing)?;
            let (threshold, scores) = single(fit)?;
            Ok((DetectorModel { kind, svm_amplitude: Some(fit.model.clone()), svm_phase: None, fusion: None, threshold }, scores))
        }
        ModelKind::Phase => {
            let fit = phase.ok_or_else(missing)?;
            let (threshold, scores) = single(fit)?;
            Ok((DetectorModel { kind, svm_amplitude: None, svm_phase: Some(fit.model.clone()), fusion: None, threshold }, scores))
        }
        ModelKind::AmplitudePlusPhase => {
            let (a, p) = (amp.ok_or_else(missing)?, phase.ok_or_else(missing)?);
            let z = pairs(&a.inner_probs, &p.inner_probs);
            let y: Vec<bool> = pool_labels.iter().flatten().copied().collect();
            let lda = lda_train(&z, &y)?;
            let w = pool_labels[0].len();
            let fused = |pa: &[Vec<f64>], pp: &[Vec<f64>]| chunk(pairs(pa, pp).into_iter().map(|v| lda.predict_proba(v)).collect(), w);
            let threshold = select_threshold(&fused(&a.inner_probs, &p.inner_probs), pool_labels)?;
            let scores = fused(&a.test_probs, &p.test_probs);
            Ok((
                DetectorModel {
                    kind,
                    svm_amplitude: Some(a.model.clone()),
                    svm_phase: Some(p.model.clone()),
                    fusion: Some(lda),
                    threshold,
                },
                scores,
            ))
        }
    }
}

/// Hyperparameters chosen for each view in a fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub amplitude: Option<GridCell>,
    pub phase: Option<GridCell>,
}

struct TaskOutput {
    per_kind: Vec<(DetectorModel, Vec<Vec<f64>>)>,
    selection: Selection,
}

fn run_tasks(kinds: &[ModelKind], views: &Views<'_>, tasks: &[Task], labels: &[Vec<bool>], cfg: &TrainConfig) -> Result<Vec<TaskOutput>> {
    if kinds.is_empty() {
        return Err(Error::EmptyInput("no model kinds"));
    }
    let mut per_view: [Option<Vec<ViewFit>>; 2] = [None, None];
    for (v, ds) in views.require(kinds)? {
        let data = view_data(ds);
        per_view[v as usize] = Some(fit_view(&data, tasks, cfg)?);
    }
    tasks
        .iter()
        .enumerate()
        .map(|(t, task)| {
            let amp = per_view[0].as_ref().map(|f| &f[t]);
            let phase = per_view[1].as_ref().map(|f| &f[t]);
            let pool_labels: Vec<Vec<bool>> = task.pool.iter().map(|&g| labels[g].clone()).collect();
            let per_kind = kinds.iter().map(|&k| assemble(k, amp, phase, &pool_labels)).collect::<Result<_>>()?;
            Ok(TaskOutput {
                per_kind,
                selection: Selection { amplitude: amp.map(|f| f.selected), phase: phase.map(|f| f.selected) },
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub model: DetectorModel,
    pub selection: Selection,
    pub train_trials: Vec<usize>,
    pub test_trials: Vec<usize>,
}

/// Nested cross-validation output for one model kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutput {
    pub kind: ModelKind,
    pub folds: Vec<FoldResult>,
    /// Out-of-fold predictions in trial order.
    pub predictions: Vec<TrialPrediction>,
}

/// Nested chronological cross-validation of several model kinds. Kinds
/// sharing a view share its grid search and SVMs.
pub fn cross_validate(
    kinds: &[ModelKind],
    views: &Views<'_>,
    plan: &FoldPlan,
    cfg: &TrainConfig,
    audit: &dyn AccessAudit,
) -> Result<Vec<CvOutput>> {
    let (trials, labels) = views.aligned(kinds)?;
    if plan.n_trials != trials.len() {
        return Err(Error::LengthMismatch { expected: trials.len(), found: plan.n_trials });
    }
    let tasks: Vec<Task> = plan
        .folds
        .iter()
        .map(|f| Task { pool: f.train.clone(), inner: f.inner.clone(), test: f.test.clone() })
        .collect();
    for task in &tasks {
        task.pool.iter().for_each(|&g| audit.record(Purpose::Fit, trials[g]));
        task.test.iter().for_each(|&g| audit.record(Purpose::Predict, trials[g]));
    }
    let outputs = run_tasks(kinds, views, &tasks, &labels, cfg)?;
    Ok(kinds
        .iter()
        .enumerate()
        .map(|(k, &kind)| {
            let mut folds = Vec::new();
            let mut predictions = Vec::new();
            for ((fold, task), out) in plan.folds.iter().zip(&tasks).zip(&outputs) {
                let (model, scores) = &out.per_kind[k];
                for (&g, s) in task.test.iter().zip(scores) {
                    predictions.push(TrialPrediction {
                        trial_index: trials[g],
                        fold: fold.index,
                        scores: s.clone(),
                        labels: labels[g].clone(),
                        threshold: model.threshold,
                    });
                }
                folds.push(FoldResult {
                    fold: fold.index,
                    model: model.clone(),
                    selection: out.selection,
                    train_trials: task.pool.iter().map(|&g| trials[g]).collect(),
                    test_trials: task.test.iter().map(|&g| trials[g]).collect(),
                });
            }
            CvOutput { kind, folds, predictions }
        })
        .collect())
}

/// Nested cross-validation of a single model kind.
pub fn train_detector(
    kind: ModelKind,
    views: &Views<'_>,
    plan: &FoldPlan,
    cfg: &TrainConfig,
    audit: &dyn AccessAudit,
) -> Result<CvOutput> {
    cross_validate(&[kind], views, plan, cfg, audit).map(|mut v| v.remove(0))
}

/// One detector per kind trained on all trials, with hyperparameters and
/// threshold chosen by chronological cross-validation inside the data.
pub fn fit_detectors(
    kinds: &[ModelKind],
    views: &Views<'_>,
    cfg: &TrainConfig,
    audit: &dyn AccessAudit,
) -> Result<Vec<(DetectorModel, Selection)>> {
    let (trials, labels) = views.aligned(kinds)?;
    let min = 2 * cfg.inner_folds;
    if trials.len() < min {
        return Err(Error::TooFewTrials { n: trials.len(), min });
    }
    let pool: Vec<usize> = (0..trials.len()).collect();
    trials.iter().for_each(|&t| audit.record(Purpose::Fit, t));
    let task = Task { inner: inner_blocks(&pool, cfg.inner_folds), pool, test: Vec::new() };
    let out = run_tasks(kinds, views, core::slice::from_ref(&task), &labels, cfg)?.remove(0);
    Ok(out.per_kind.into_iter().map(|(m, _)| (m, out.selection)).collect())
}

impl DetectorModel {
    fn view_probs(&self, svm: Option<&SvmModel>, ds: Option<&WindowDataset>) -> Result<Option<Vec<f64>>> {
        match (svm, ds) {
            (Some(m), Some(ds)) => {
                let xs: Vec<&[f64]> = ds.trials().iter().flat_map(|t| t.windows.iter().map(|w| w.values.as_slice())).collect();
                svm_predict_proba(m, &xs).map(Some)
            }
            (Some(_), None) => Err(Error::Misaligned(alloc::format!("{} needs a missing view", self.kind))),
            _ => Ok(None),
        }
    }

    /// Window scores and flags for every trial of `views`, fold 0.
    pub fn predict(&self, views: &Views<'_>, audit: &dyn AccessAudit) -> Result<Vec<TrialPrediction>> {
        let (trials, labels) = views.aligned(&[self.kind])?;
        trials.iter().for_each(|&t| audit.record(Purpose::Predict, t));
        let pa = self.view_probs(self.svm_amplitude.as_ref(), views.amplitude)?;
        let pp = self.view_probs(self.svm_phase.as_ref(), views.phase)?;
        let scores: Vec<f64> = match (&self.fusion, pa, pp) {
            (Some(lda), Some(a), Some(p)) => a.iter().zip(&p).map(|(&x, &y)| lda.predict_proba([x, y])).collect(),
            (None, Some(a), None) | (None, None, Some(a)) => a,
            _ => return Err(Error::Misaligned(alloc::format!("{} detector has inconsistent parts", self.kind))),
        };
        let w = labels[0].len();
        Ok(trials
            .iter()
            .zip(labels)
            .zip(scores.chunks(w))
            .map(|((&trial_index, labels), s)| TrialPrediction {
                trial_index,
                fold: 0,
                scores: s.to_vec(),
                labels,
                threshold: self.threshold,
            })
            .collect())
    }
}

/// Applies a trained detector, unchanged, to another session or subject.
pub fn transfer_evaluate(model: &DetectorModel, target: &Views<'_>, audit: &dyn AccessAudit) -> Result<Vec<TrialPrediction>> {
    model.predict(target, audit)
}
