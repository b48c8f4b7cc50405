//! Sliding-window segmentation of epochs into labeled amplitude and
//! sine/cosine phase feature vectors.
//!
//! Windows are labeled by their center: a window is pre-movement iff its
//! center lies strictly after the boundary (−1.5 s by default). With 1 s
//! windows stepped by 125 ms over (−6, 0) s this yields 41 windows of which
//! the last 8 (centers −1.375 … −0.5 s) are pre-movement.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dsp::{analytic_signal, instantaneous_phase};
use crate::model::Epoch;
use crate::{Error, Result};

/// Electrodes over the motor and sensorimotor cortex.
pub const DEFAULT_CHANNELS: [&str; 10] = ["F3", "Fz", "F4", "FC1", "FC2", "C3", "Cz", "C4", "CP1", "CP2"];

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSpec {
    pub length_s: f64,
    pub step_s: f64,
    pub epoch_start_s: f64,
    pub epoch_end_s: f64,
    pub premovement_boundary_s: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { length_s: 1.0, step_s: 0.125, epoch_start_s: -6.0, epoch_end_s: 0.0, premovement_boundary_s: -1.5 }
    }
}

impl WindowSpec {
    pub fn window_count(&self) -> Result<usize> {
        let span = self.epoch_end_s - self.epoch_start_s;
        if !(self.length_s > 0.0 && self.step_s > 0.0 && span >= self.length_s) {
            return Err(Error::InvalidWindowSpec(alloc::format!(
                "length {} s and step {} s do not fit a {span} s epoch",
                self.length_s,
                self.step_s
            )));
        }
        let steps = (span - self.length_s) / self.step_s;
        let rounded = libm::round(steps);
        if libm::fabs(steps - rounded) > 1e-9 {
            return Err(Error::InvalidWindowSpec(alloc::format!("{steps} steps is not a whole number")));
        }
        Ok(rounded as usize + 1)
    }

    /// Center of the 1-based window `index`.
    pub fn center_of(&self, index: usize) -> f64 {
        self.epoch_start_s + (index - 1) as f64 * self.step_s + self.length_s / 2.0
    }

    pub fn label_of(&self, index: usize) -> Label {
        if self.center_of(index) > self.premovement_boundary_s + TIME_EPS {
            Label::Premovement
        } else {
            Label::Relax
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Relax,
    Premovement,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Premovement
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Relax => "relax",
            Label::Premovement => "premovement",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    /// 1-based.
    pub index: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub center_s: f64,
    pub label: Label,
}

/// All windows of an epoch of length `epoch_length_s`.
pub fn make_windows(epoch_length_s: f64, spec: &WindowSpec) -> Result<Vec<Window>> {
    let span = spec.epoch_end_s - spec.epoch_start_s;
    if libm::fabs(span - epoch_length_s) > TIME_EPS {
        return Err(Error::InvalidWindowSpec(alloc::format!(
            "spec spans {span} s but the epoch is {epoch_length_s} s"
        )));
    }
    let count = spec.window_count()?;
    Ok((1..=count)
        .map(|index| {
            let start_s = spec.epoch_start_s + (index - 1) as f64 * spec.step_s;
            Window {
                index,
                start_s,
                end_s: start_s + spec.length_s,
                center_s: spec.center_of(index),
                label: spec.label_of(index),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub spec: WindowSpec,
    pub channels: Vec<String>,
    /// Keep every `decimation`-th sample of each window.
    pub decimation: usize,
    /// Scale each feature vector to unit Euclidean length.
    pub normalize: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            spec: WindowSpec::default(),
            channels: DEFAULT_CHANNELS.iter().map(|c| String::from(*c)).collect(),
            decimation: 16,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: Label,
    pub trial_index: usize,
    /// 1-based.
    pub window_index: usize,
    pub window_center_s: f64,
    /// All-zero window left unnormalized.
    pub degenerate: bool,
}

/// Scales `v` to unit length. Returns `false` (and leaves `v`) when it is all zero.
pub fn unit_normalize(v: &mut [f64]) -> bool {
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    true
}

/// Sample ranges `[start, start + len)` of every window inside an epoch.
fn window_samples(fs: f64, epoch_len: usize, cfg: &FeatureConfig) -> Result<Vec<(Window, usize, usize)>> {
    let windows = make_windows(epoch_len as f64 / fs, &cfg.spec)?;
    let len = libm::round(cfg.spec.length_s * fs) as usize;
    if cfg.decimation == 0 || len % cfg.decimation != 0 {
        return Err(Error::InvalidWindowSpec(alloc::format!(
            "decimation {} does not divide the {len}-sample window",
            cfg.decimation
        )));
    }
    windows
        .into_iter()
        .map(|w| {
            let start = libm::round((w.start_s - cfg.spec.epoch_start_s) * fs) as usize;
            if start + len > epoch_len {
                return Err(Error::InvalidWindowSpec(alloc::format!("window {} runs past the epoch", w.index)));
            }
            Ok((w, start, len))
        })
        .collect()
}

fn select_channels<'a>(epoch: &'a Epoch, cfg: &FeatureConfig) -> Result<Vec<&'a [f64]>> {
    cfg.channels.iter().map(|c| epoch.channel(c)).collect()
}

/// Builds one vector per window from per-channel traces. `blocks` maps a
/// decimated slice of one channel to the feature blocks appended for it.
fn windowed<F>(
    traces: &[&[f64]],
    fs: f64,
    trial_index: usize,
    cfg: &FeatureConfig,
    mut blocks: F,
) -> Result<Vec<FeatureVector>>
where
    F: FnMut(&mut Vec<f64>, &[f64]),
{
    let epoch_len = traces.first().ok_or(Error::EmptyInput("no channels selected"))?.len();
    let mut scratch = Vec::new();
    window_samples(fs, epoch_len, cfg)?
        .into_iter()
        .map(|(w, start, len)| {
            let mut values = Vec::new();
            for trace in traces {
                scratch.clear();
                scratch.extend(trace[start..start + len].iter().step_by(cfg.decimation));
                blocks(&mut values, &scratch);
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeatures);
            }
            let degenerate = if cfg.normalize { !unit_normalize(&mut values) } else { false };
            Ok(FeatureVector {
                values,
                label: w.label,
                trial_index,
                window_index: w.index,
                window_center_s: w.center_s,
                degenerate,
            })
        })
        .collect()
}

/// Amplitude features from already-filtered traces, one per selected channel.
pub fn amplitude_features_from_traces(
    traces: &[&[f64]],
    fs: f64,
    trial_index: usize,
    cfg: &FeatureConfig,
) -> Result<Vec<FeatureVector>> {
    windowed(traces, fs, trial_index, cfg, |out, s| out.extend_from_slice(s))
}

/// Phase features from instantaneous-phase traces: per channel the cosine
/// block followed by the sine block.
pub fn phase_features_from_traces(
    phases: &[&[f64]],
    fs: f64,
    trial_index: usize,
    cfg: &FeatureConfig,
) -> Result<Vec<FeatureVector>> {
    windowed(phases, fs, trial_index, cfg, |out, s| {
        out.extend(s.iter().map(|&p| libm::cos(p)));
        out.extend(s.iter().map(|&p| libm::sin(p)));
    })
}

/// Epoch must already be band-passed to the MRCP band.
pub fn extract_amplitude_features(epoch: &Epoch, cfg: &FeatureConfig) -> Result<Vec<FeatureVector>> {
    let traces = select_channels(epoch, cfg)?;
    amplitude_features_from_traces(&traces, epoch.sampling_rate_hz(), epoch.trial_index(), cfg)
}

/// Phase is computed over the whole epoch, then windowed.
pub fn extract_phase_features(epoch: &Epoch, cfg: &FeatureConfig) -> Result<Vec<FeatureVector>> {
    let phases = select_channels(epoch, cfg)?
        .into_iter()
        .map(|t| analytic_signal(t).map(|z| instantaneous_phase(&z).values))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[f64]> = phases.iter().map(|p| p.as_slice()).collect();
    phase_features_from_traces(&refs, epoch.sampling_rate_hz(), epoch.trial_index(), cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewKind {
    Amplitude,
    Phase,
}

impl ViewKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViewKind::Amplitude => "amplitude",
            ViewKind::Phase => "phase",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialWindows {
    pub trial_index: usize,
    pub windows: Vec<FeatureVector>,
}

/// Per-trial window sequences of one feature view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowDataset {
    kind: ViewKind,
    channels: Vec<String>,
    trials: Vec<TrialWindows>,
}

impl WindowDataset {
    pub fn new(kind: ViewKind, channels: Vec<String>, trials: Vec<TrialWindows>) -> Result<Self> {
        let first = trials.first().ok_or(Error::EmptyInput("dataset has no trials"))?;
        let n_windows = first.windows.len();
        let dim = first.windows.first().map(|w| w.values.len()).ok_or(Error::EmptyInput("trial has no windows"))?;
        for t in &trials {
            if t.windows.len() != n_windows {
                return Err(Error::LengthMismatch { expected: n_windows, found: t.windows.len() });
            }
            if let Some(w) = t.windows.iter().find(|w| w.values.len() != dim) {
                return Err(Error::DimensionMismatch { expected: dim, found: w.values.len() });
            }
        }
        Ok(Self { kind, channels, trials })
    }

    pub fn kind(&self) -> ViewKind {
        self.kind
    }

    pub fn channels(&self) -> &[String] {
        &self.channels
    }

    pub fn trials(&self) -> &[TrialWindows] {
        &self.trials
    }

    pub fn n_trials(&self) -> usize {
        self.trials.len()
    }

    pub fn windows_per_trial(&self) -> usize {
        self.trials[0].windows.len()
    }

    pub fn dim(&self) -> usize {
        self.trials[0].windows[0].values.len()
    }

    /// Dataset restricted to the trials at the given positions.
    pub fn subset(&self, positions: &[usize]) -> Self {
        Self {
            kind: self.kind,
            channels: self.channels.clone(),
            trials: positions.iter().map(|&p| self.trials[p].clone()).collect(),
        }
    }

    /// Appends the trials of `other`. Views and dimensions must agree.
    pub fn concat(parts: &[&WindowDataset]) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptyInput("no datasets to concatenate"))?;
        let mut trials = Vec::new();
        for p in parts {
            if p.kind != first.kind || p.channels != first.channels {
                return Err(Error::Misaligned("datasets differ in view or channels".into()));
            }
            trials.extend(p.trials.iter().cloned());
        }
        Self::new(first.kind, first.channels.clone(), trials)
    }

    /// Replaces labels, trial-major. Used for shuffled-label controls.
    pub fn with_labels(&self, labels: &[Label]) -> Result<Self> {
        let n = self.n_trials() * self.windows_per_trial();
        if labels.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: labels.len() });
        }
        let mut out = self.clone();
        for (w, &l) in out.trials.iter_mut().flat_map(|t| t.windows.iter_mut()).zip(labels) {
            w.label = l;
        }
        Ok(out)
    }
}

/// Window labels permuted across all trials and windows of `ds`, trial-major.
pub fn permuted_labels(ds: &WindowDataset, seed: u64) -> Vec<Label> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut labels: Vec<Label> = ds.trials().iter().flat_map(|t| t.windows.iter().map(|w| w.label)).collect();
    labels.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    labels
}

/// Extracts one view for every epoch.
pub fn build_dataset(kind: ViewKind, epochs: &[Epoch], cfg: &FeatureConfig) -> Result<WindowDataset> {
    let trials = epochs
        .iter()
        .map(|e| {
            let windows = match kind {
                ViewKind::Amplitude => extract_amplitude_features(e, cfg)?,
                ViewKind::Phase => extract_phase_features(e, cfg)?,
            };
            Ok(TrialWindows { trial_index: e.trial_index(), windows })
        })
        .collect::<Result<Vec<_>>>()?;
    WindowDataset::new(kind, cfg.channels.clone(), trials)
}
