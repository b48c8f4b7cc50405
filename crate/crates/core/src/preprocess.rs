//! Movement-onset detection, protocol-violation rejection and baseline
//! effect sizes.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dsp::{analytic_signal, instantaneous_phase, instantaneous_power_db, plv};
use crate::linalg::{mean, sample_std};
use crate::model::{Epoch, EPOCH_SPAN_S};
use crate::{Error, Result};

/// Movement onset precedes the footswitch release by this much.
pub const FOOTSWITCH_LEAD_S: f64 = 0.5;

/// Baseline interval relative to onset used for effect sizes.
pub const BASELINE_WINDOW_S: (f64, f64) = (-5.5, -4.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OnsetMethod {
    Footswitch,
    Emg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnsetResult {
    pub trial_index: usize,
    pub onset_time_s: f64,
    pub method: OnsetMethod,
    pub rejected: bool,
    pub reject_reason: Option<String>,
}

impl OnsetResult {
    pub fn accepted(trial_index: usize, onset_time_s: f64, method: OnsetMethod) -> Self {
        Self { trial_index, onset_time_s, method, rejected: false, reject_reason: None }
    }

    fn reject(&mut self, reason: &str) {
        if !self.rejected {
            self.rejected = true;
            self.reject_reason = Some(reason.into());
        }
    }
}

pub fn onset_from_footswitch(release_time_s: f64) -> f64 {
    release_time_s - FOOTSWITCH_LEAD_S
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmgOnsetConfig {
    /// Fraction of the peak of the trial-averaged power trace.
    pub threshold_fraction: f64,
    /// Onset is this long before the threshold crossing.
    pub lead_s: f64,
    /// Centered moving-average length applied to each power trace; 0 disables.
    pub smoothing_s: f64,
    /// Position of the cue inside each trace.
    pub cue_offset_s: f64,
    /// Restrict the peak search and the crossing search to after the cue.
    pub post_cue_only: bool,
}

impl Default for EmgOnsetConfig {
    fn default() -> Self {
        Self { threshold_fraction: 0.10, lead_s: 0.100, smoothing_s: 0.050, cue_offset_s: 0.0, post_cue_only: false }
    }
}

/// One trial's samples, time-locked to its cue.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTrace {
    pub trial_index: usize,
    /// Recording time of `values[0]`.
    pub start_time_s: f64,
    pub values: Vec<f64>,
}

/// Envelope power `|z(t)|²` of a band-passed EMG trace.
pub fn emg_envelope_power(samples: &[f64]) -> Result<Vec<f64>> {
    let z = analytic_signal(samples)?;
    Ok(z.real().iter().zip(z.imag()).map(|(re, im)| re * re + im * im).collect())
}

fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 {
        return x.to_vec();
    }
    let back = (width - 1) / 2;
    let fwd = width - 1 - back;
    let mut prefix = Vec::with_capacity(x.len() + 1);
    prefix.push(0.0);
    for &v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(back);
            let hi = (i + fwd + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// EMG onsets from band-passed (100–125 Hz) traces time-locked to the cue.
pub fn onset_from_emg(trials: &[TrialTrace], fs: f64, cfg: &EmgOnsetConfig) -> Result<Vec<OnsetResult>> {
    let powers = trials
        .iter()
        .map(|t| {
            Ok(TrialTrace {
                trial_index: t.trial_index,
                start_time_s: t.start_time_s,
                values: emg_envelope_power(&t.values)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    onsets_from_envelope_power(&powers, fs, cfg)
}

/// Threshold crossing on precomputed envelope-power traces.
///
/// Each trace is smoothed, the smoothed traces are averaged across trials and
/// the threshold is `threshold_fraction` of the peak of that average. A
/// trial's onset is its first sample strictly above threshold minus `lead_s`.
pub fn onsets_from_envelope_power(
    traces: &[TrialTrace],
    fs: f64,
    cfg: &EmgOnsetConfig,
) -> Result<Vec<OnsetResult>> {
    let first = traces.first().ok_or(Error::EmptyInput("no EMG trials"))?;
    let n = first.values.len();
    if let Some(t) = traces.iter().find(|t| t.values.len() != n) {
        return Err(Error::LengthMismatch { expected: n, found: t.values.len() });
    }
    let width = libm::round(cfg.smoothing_s * fs).max(0.0) as usize;
    let smoothed: Vec<Vec<f64>> = traces.iter().map(|t| moving_average(&t.values, width)).collect();
    let mut avg = alloc::vec![0.0; n];
    for s in &smoothed {
        for (a, v) in avg.iter_mut().zip(s) {
            *a += v;
        }
    }
    for a in &mut avg {
        *a /= traces.len() as f64;
    }
    let search_from =
        if cfg.post_cue_only { (libm::round(cfg.cue_offset_s * fs).max(0.0) as usize).min(n) } else { 0 };
    let peak = avg[search_from..].iter().copied().fold(0.0, f64::max);
    let threshold = cfg.threshold_fraction * peak;

    Ok(traces
        .iter()
        .zip(&smoothed)
        .map(|(t, s)| match s[search_from..].iter().position(|&v| v > threshold) {
            Some(i) => OnsetResult::accepted(
                t.trial_index,
                t.start_time_s + (search_from + i) as f64 / fs - cfg.lead_s,
                OnsetMethod::Emg,
            ),
            None => {
                let mut r = OnsetResult::accepted(t.trial_index, f64::NAN, OnsetMethod::Emg);
                r.reject("no EMG crossing");
                r
            }
        })
        .collect())
}

/// Flags trials whose onset precedes their cue. Onset times are untouched.
pub fn reject_protocol_violations(mut onsets: Vec<OnsetResult>, cue_times: &[f64]) -> Result<Vec<OnsetResult>> {
    if onsets.len() != cue_times.len() {
        return Err(Error::LengthMismatch { expected: onsets.len(), found: cue_times.len() });
    }
    for (o, &cue) in onsets.iter_mut().zip(cue_times) {
        if o.onset_time_s < cue {
            o.reject("onset before cue");
        }
    }
    Ok(onsets)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Amplitude,
    PhasePlv,
    Power,
}

/// Baseline-normalized feature trace in baseline standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSizeSeries {
    pub channel: String,
    pub feature_kind: FeatureKind,
    pub values: Vec<f64>,
    pub baseline_window_s: (f64, f64),
}

impl EffectSizeSeries {
    /// Mean effect size over `[from_s, to_s)` relative to onset.
    pub fn mean_over(&self, fs: f64, from_s: f64, to_s: f64) -> f64 {
        let (lo, hi) = sample_range(fs, self.values.len(), from_s, to_s);
        mean(&self.values[lo..hi])
    }
}

fn sample_range(fs: f64, len: usize, from_s: f64, to_s: f64) -> (usize, usize) {
    let idx = |t: f64| (libm::round((t + EPOCH_SPAN_S) * fs).max(0.0) as usize).min(len);
    (idx(from_s), idx(to_s))
}

/// Subtracts the baseline mean and divides by the baseline standard
/// deviation of an onset-aligned trace.
pub fn baseline_normalize(trace: &[f64], fs: f64, window_s: (f64, f64)) -> Result<Vec<f64>> {
    let (lo, hi) = sample_range(fs, trace.len(), window_s.0, window_s.1);
    if hi <= lo + 1 {
        return Err(Error::InsufficientData("baseline window holds fewer than two samples".into()));
    }
    let base = &trace[lo..hi];
    let m = mean(base);
    let sd = sample_std(base);
    if !(sd > 1e-300) || !sd.is_finite() {
        return Err(Error::DegenerateBaseline);
    }
    Ok(trace.iter().map(|v| (v - m) / sd).collect())
}

/// Trial-averaged feature trace of one channel (PLV across trials for phase).
pub fn feature_trace(epochs: &[Epoch], channel: &str, kind: FeatureKind) -> Result<Vec<f64>> {
    if epochs.len() < 2 {
        return Err(Error::TooFewTrials { n: epochs.len(), min: 2 });
    }
    let rows = epochs.iter().map(|e| e.channel(channel)).collect::<Result<Vec<_>>>()?;
    let n = rows[0].len();
    match kind {
        FeatureKind::Amplitude => Ok(average(rows.iter().map(|r| r.to_vec()), n)),
        FeatureKind::Power => {
            let per_trial = rows
                .iter()
                .map(|r| analytic_signal(r).map(|z| instantaneous_power_db(&z)))
                .collect::<Result<Vec<_>>>()?;
            Ok(average(per_trial.into_iter(), n))
        }
        FeatureKind::PhasePlv => {
            let phases = rows
                .iter()
                .map(|r| analytic_signal(r).map(|z| instantaneous_phase(&z).values))
                .collect::<Result<Vec<_>>>()?;
            plv(&phases)
        }
    }
}

fn average(rows: impl Iterator<Item = Vec<f64>>, n: usize) -> Vec<f64> {
    let mut acc = alloc::vec![0.0; n];
    let mut count = 0usize;
    for row in rows {
        for (a, v) in acc.iter_mut().zip(&row) {
            *a += v;
        }
        count += 1;
    }
    acc.iter().map(|v| v / count as f64).collect()
}

/// Effect size of a feature at one channel relative to the (−5.5, −4) s
/// baseline of the trial-averaged trace.
pub fn effect_size(epochs: &[Epoch], channel: &str, feature_kind: FeatureKind) -> Result<EffectSizeSeries> {
    let trace = feature_trace(epochs, channel, feature_kind)?;
    let fs = epochs[0].sampling_rate_hz();
    if let Some(e) = epochs.iter().find(|e| e.sampling_rate_hz() != fs) {
        return Err(Error::Misaligned(alloc::format!(
            "trial {} sampled at {} Hz, expected {fs}",
            e.trial_index(),
            e.sampling_rate_hz()
        )));
    }
    let values = baseline_normalize(&trace, fs, BASELINE_WINDOW_S)?;
    Ok(EffectSizeSeries { channel: channel.into(), feature_kind, values, baseline_window_s: BASELINE_WINDOW_S })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn footswitch_onset_is_half_a_second_earlier() {
        assert_eq!(onset_from_footswitch(12.0), 11.5);
        assert_eq!(onset_from_footswitch(0.5), 0.0);
        assert_eq!(onset_from_footswitch(100.25), 99.75);
    }

    fn step_trace(trial: usize, fs: f64, step_s: f64, len_s: f64, level: f64) -> TrialTrace {
        let n = (len_s * fs) as usize;
        let step = (step_s * fs) as usize;
        TrialTrace {
            trial_index: trial,
            start_time_s: 0.0,
            values: (0..n).map(|i| if i >= step { level } else { 0.0 }).collect(),
        }
    }

    #[test]
    fn power_step_gives_onset_100ms_before() {
        let cfg = EmgOnsetConfig { smoothing_s: 0.0, ..Default::default() };
        let r = onsets_from_envelope_power(&[step_trace(0, 1000.0, 2.0, 4.0, 5.0)], 1000.0, &cfg).unwrap();
        assert!(!r[0].rejected);
        assert!((r[0].onset_time_s - 1.9).abs() < 1e-12);
    }

    #[test]
    fn smoothing_moves_step_onset_by_less_than_half_a_window() {
        let r = onsets_from_envelope_power(&[step_trace(0, 1000.0, 2.0, 4.0, 5.0)], 1000.0, &Default::default())
            .unwrap();
        assert!((r[0].onset_time_s - 1.9).abs() <= 0.025);
    }

    #[test]
    fn silent_trial_is_rejected() {
        let traces = [step_trace(0, 500.0, 1.0, 3.0, 2.0), step_trace(1, 500.0, 1.0, 3.0, 0.0)];
        let r = onsets_from_envelope_power(&traces, 500.0, &Default::default()).unwrap();
        assert!(!r[0].rejected);
        assert!(r[1].rejected);
        assert_eq!(r[1].reject_reason.as_deref(), Some("no EMG crossing"));
    }

    #[test]
    fn post_cue_restriction_ignores_pre_cue_activity() {
        let fs = 100.0;
        let mut t = step_trace(0, fs, 2.0, 4.0, 1.0);
        t.values[20] = 50.0; // artifact before the cue at 1 s
        let cfg = EmgOnsetConfig { smoothing_s: 0.0, cue_offset_s: 1.0, post_cue_only: true, ..Default::default() };
        let r = onsets_from_envelope_power(&[t.clone()], fs, &cfg).unwrap();
        assert!((r[0].onset_time_s - 1.9).abs() < 1e-12);
        let whole = EmgOnsetConfig { smoothing_s: 0.0, ..Default::default() };
        let r = onsets_from_envelope_power(&[t], fs, &whole).unwrap();
        assert!((r[0].onset_time_s - 0.1).abs() < 1e-12);
    }

    #[test]
    fn unequal_traces_are_an_error() {
        let traces = [step_trace(0, 100.0, 1.0, 3.0, 1.0), step_trace(1, 100.0, 1.0, 2.0, 1.0)];
        assert!(onsets_from_envelope_power(&traces, 100.0, &Default::default()).is_err());
    }

    #[test]
    fn protocol_violations_are_flagged_not_moved() {
        let onsets = vec![
            OnsetResult::accepted(0, 9.0, OnsetMethod::Footswitch),
            OnsetResult::accepted(1, 12.0, OnsetMethod::Footswitch),
        ];
        let out = reject_protocol_violations(onsets, &[10.0, 10.0]).unwrap();
        assert!(out[0].rejected);
        assert_eq!(out[0].onset_time_s, 9.0);
        assert!(!out[1].rejected);
        assert!(reject_protocol_violations(out, &[1.0]).is_err());
    }

    #[test]
    fn baseline_normalization_definition() {
        let fs = 100.0;
        // Baseline alternates ±1 (sample sd known), then +2σ plateau after −1.5 s.
        let n = 600;
        let mut trace: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let base: Vec<f64> = trace[50..200].to_vec();
        let sd = sample_std(&base);
        let m = mean(&base);
        for v in &mut trace[450..] {
            *v = m + 2.0 * sd;
        }
        let es = baseline_normalize(&trace, fs, BASELINE_WINDOW_S).unwrap();
        assert!(es[450..].iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert!(mean(&es[50..200]).abs() < 1e-12);
    }

    #[test]
    fn flat_baseline_is_degenerate() {
        assert_eq!(baseline_normalize(&[1.0; 600], 100.0, BASELINE_WINDOW_S), Err(Error::DegenerateBaseline));
    }

    #[test]
    fn effect_size_needs_two_epochs_and_known_channel() {
        let ep = Epoch::new(0, 6.0, vec!["Cz".into()], vec![vec![0.0; 60]], 10.0).unwrap();
        assert!(matches!(effect_size(&[ep.clone()], "Cz", FeatureKind::Amplitude), Err(Error::TooFewTrials { .. })));
        assert!(matches!(
            effect_size(&[ep.clone(), ep], "Pz", FeatureKind::Amplitude),
            Err(Error::UnknownChannel(_))
        ));
    }
}
