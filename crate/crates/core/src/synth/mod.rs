//! Synthetic walking sessions with known onsets: EEG carrying a slow
//! negative deflection and a pre-onset delta phase reset, an EMG channel
//! with a burst at each onset, and the event markers of the cue protocol.
//!
//! All template parameters are invented. Every trial draws its own
//! parameters from a seed derived from `(seed, trial_index)`.

mod render;
mod rng;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::features::DEFAULT_CHANNELS;
use crate::model::{Recording, EPOCH_SPAN_S};
use crate::preprocess::FOOTSWITCH_LEAD_S;
use crate::{Error, Result};

pub use render::{carrier_phase, mrcp_template, render_session};
pub use rng::{derive_seed, splitmix64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Spectral exponent α of the 1/f^α background.
    pub exponent: f64,
    /// RMS of the colored background per channel, µV.
    pub rms_uv: f64,
    /// White floor relative to the colored RMS, dB.
    pub white_floor_db: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { exponent: 1.0, rms_uv: 10.0, white_floor_db: -20.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmgBurst {
    /// Linear amplitude rise from onset to the plateau.
    pub rise_ms: f64,
    /// Plateau RMS, mV.
    pub amplitude_mv: f64,
    /// Resting RMS, mV.
    pub baseline_mv: f64,
}

impl Default for EmgBurst {
    fn default() -> Self {
        Self { rise_ms: 300.0, amplitude_mv: 1.0, baseline_mv: 0.01 }
    }
}

/// Durations of the cue protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Protocol {
    pub relax_s: f64,
    /// Cue-to-onset wait drawn uniformly from this range.
    pub wait_s: (f64, f64),
    pub walk_s: f64,
    /// Pause after walking before the next relaxation period.
    pub rest_s: f64,
    pub trials_per_block: usize,
    pub block_break_s: f64,
    pub lead_in_s: f64,
    pub tail_s: f64,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            relax_s: 8.0,
            wait_s: (1.6, 3.5),
            walk_s: 3.0,
            rest_s: 1.0,
            trials_per_block: 10,
            block_break_s: 10.0,
            lead_in_s: 2.0,
            tail_s: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub session_id: String,
    pub n_trials: usize,
    pub fs: f64,
    /// EEG channels in recording order.
    pub channels: Vec<String>,
    /// Name of the EMG channel appended after the EEG channels.
    pub emg_channel: String,
    /// Source gain per EEG channel; channels not listed get 0.
    pub topography: BTreeMap<String, f64>,
    /// Depth of the negative deflection at onset at gain 1, µV.
    pub mrcp_amplitude_uv: f64,
    pub mrcp_onset_lead_s: f64,
    /// Time after onset for the deflection to return to baseline.
    pub mrcp_recovery_s: f64,
    /// Delta carrier amplitude at gain 1, µV.
    pub carrier_amplitude_uv: f64,
    /// Range of the per-trial free carrier frequency.
    pub carrier_freq_hz: (f64, f64),
    /// Phase steering starts this long before onset.
    pub phase_reset_lead_s: f64,
    /// Duration over which steering blends in.
    pub phase_ramp_s: f64,
    /// Carrier phase reached at onset; it rises linearly from π/2 when the
    /// steering starts.
    pub reset_target_phase_rad: f64,
    /// Log-normal spread of per-trial template amplitudes.
    pub amplitude_jitter: f64,
    /// Log-normal spread of per-trial, per-channel gains.
    pub channel_gain_jitter: f64,
    /// Log-normal spread of fixed per-channel gains for this session.
    pub session_gain_drift: f64,
    /// Seed for the session-level gains; sessions of one subject that share
    /// it drift together.
    pub drift_seed: u64,
    pub noise: NoiseModel,
    pub emg_burst: EmgBurst,
    pub protocol: Protocol,
    pub seed: u64,
}

/// Electrodes around Cz and their gains.
pub fn default_topography() -> BTreeMap<String, f64> {
    let gains = [
        ("Cz", 1.0),
        ("FC1", 0.7),
        ("FC2", 0.7),
        ("C3", 0.7),
        ("C4", 0.7),
        ("Fz", 0.6),
        ("F3", 0.4),
        ("F4", 0.4),
        ("CP1", 0.4),
        ("CP2", 0.4),
    ];
    gains.iter().map(|(c, g)| (String::from(*c), *g)).collect()
}

impl Default for SynthConfig {
    fn default() -> Self {
        let mut channels: Vec<String> = DEFAULT_CHANNELS.iter().map(|c| String::from(*c)).collect();
        channels.extend(["Pz", "Oz"].map(String::from));
        Self {
            session_id: "synthetic".into(),
            n_trials: 100,
            fs: 256.0,
            channels,
            emg_channel: "EMG".into(),
            topography: default_topography(),
            mrcp_amplitude_uv: 8.0,
            mrcp_onset_lead_s: 1.0,
            mrcp_recovery_s: 1.5,
            carrier_amplitude_uv: 10.0,
            carrier_freq_hz: (0.2, 0.6),
            phase_reset_lead_s: 1.5,
            phase_ramp_s: 0.5,
            reset_target_phase_rad: PI,
            amplitude_jitter: 0.3,
            channel_gain_jitter: 0.3,
            session_gain_drift: 0.0,
            drift_seed: 0,
            noise: NoiseModel::default(),
            emg_burst: EmgBurst::default(),
            protocol: Protocol::default(),
            seed: 0,
        }
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidConfig(msg)
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let p = &self.protocol;
        if self.n_trials == 0 {
            return Err(invalid("n_trials must be positive".into()));
        }
        if !(self.fs > 0.0) {
            return Err(invalid(alloc::format!("sampling rate {} must be positive", self.fs)));
        }
        let (f_lo, f_hi) = self.carrier_freq_hz;
        if !(f_lo > 0.0 && f_hi >= f_lo && self.fs > 2.0 * f_hi) {
            return Err(invalid(alloc::format!("carrier range {f_lo}..{f_hi} Hz invalid at {} Hz", self.fs)));
        }
        for (name, lead) in [("mrcp_onset_lead_s", self.mrcp_onset_lead_s), ("phase_reset_lead_s", self.phase_reset_lead_s)] {
            if !(lead >= 0.0 && lead < EPOCH_SPAN_S) {
                return Err(invalid(alloc::format!("{name} = {lead} must be in [0, {EPOCH_SPAN_S})")));
            }
        }
        if !(self.phase_ramp_s > 0.0) {
            return Err(invalid("phase_ramp_s must be positive".into()));
        }
        if !(PI / 2.0..=PI).contains(&self.reset_target_phase_rad) {
            return Err(invalid(alloc::format!("reset target {} outside [pi/2, pi]", self.reset_target_phase_rad)));
        }
        let nonneg = [
            self.mrcp_amplitude_uv,
            self.mrcp_recovery_s,
            self.carrier_amplitude_uv,
            self.amplitude_jitter,
            self.channel_gain_jitter,
            self.session_gain_drift,
            self.noise.rms_uv,
            self.emg_burst.rise_ms,
            self.emg_burst.amplitude_mv,
            self.emg_burst.baseline_mv,
        ];
        if nonneg.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(invalid("amplitudes, spreads and durations must be non-negative".into()));
        }
        if !(p.wait_s.0 > 0.0 && p.wait_s.1 >= p.wait_s.0 && p.relax_s >= 0.0 && p.walk_s > 0.0 && p.rest_s >= 0.0) {
            return Err(invalid("protocol durations are inconsistent".into()));
        }
        if p.lead_in_s + p.relax_s + p.wait_s.0 < EPOCH_SPAN_S {
            return Err(invalid("first onset would fall inside the first 6 s".into()));
        }
        if self.channels.is_empty() {
            return Err(invalid("no EEG channels".into()));
        }
        if let Some(c) = self.topography.keys().find(|c| !self.channels.contains(c)) {
            return Err(Error::UnknownChannel(c.clone()));
        }
        Ok(())
    }
}

/// Per-trial timing and template parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTruth {
    pub trial_index: usize,
    /// Start of the relaxation period.
    pub start_time_s: f64,
    pub cue_time_s: f64,
    pub onset_time_s: f64,
    pub footswitch_time_s: f64,
    pub carrier_freq_hz: f64,
    /// Multiplies both the carrier and the deflection.
    pub amplitude_scale: f64,
    pub channel_gains: Vec<f64>,
    /// Onset deliberately moved before the cue.
    pub violation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub session_id: String,
    pub duration_s: f64,
    pub block_breaks_s: Vec<(usize, f64)>,
    /// Fixed per-channel gains of this session.
    pub session_gains: Vec<f64>,
    pub trials: Vec<TrialTruth>,
}

impl GroundTruth {
    pub fn onsets(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.onset_time_s).collect()
    }

    pub fn violations(&self) -> Vec<usize> {
        self.trials.iter().filter(|t| t.violation).map(|t| t.trial_index).collect()
    }
}

const STREAM_TRIAL: u64 = 1;
const STREAM_SESSION: u64 = 2;
pub(crate) const STREAM_NOISE: u64 = 3;
pub(crate) const STREAM_EMG: u64 = 4;
const STREAM_VIOLATION: u64 = 5;

/// Lays out the trial timeline and draws per-trial parameters.
pub fn plan_session(cfg: &SynthConfig) -> Result<GroundTruth> {
    cfg.validate()?;
    let p = &cfg.protocol;
    let n_ch = cfg.channels.len();
    let mut drift = rng::stream(cfg.drift_seed, STREAM_SESSION, 0);
    let session_gains: Vec<f64> =
        (0..n_ch).map(|_| libm::exp(cfg.session_gain_drift * rng::normal(&mut drift))).collect();

    let mut t = p.lead_in_s;
    let mut trials = Vec::with_capacity(cfg.n_trials);
    let mut block_breaks_s = Vec::new();
    for k in 0..cfg.n_trials {
        if k > 0 && p.trials_per_block > 0 && k % p.trials_per_block == 0 {
            block_breaks_s.push((k, t));
            t += p.block_break_s;
        }
        let mut r = rng::stream(cfg.seed, STREAM_TRIAL, k as u64);
        let start = t;
        let cue = start + p.relax_s;
        let onset = cue + rng::uniform_in(&mut r, p.wait_s.0, p.wait_s.1);
        let carrier_freq_hz = rng::uniform_in(&mut r, cfg.carrier_freq_hz.0, cfg.carrier_freq_hz.1);
        let amplitude_scale = libm::exp(cfg.amplitude_jitter * rng::normal(&mut r));
        let channel_gains = (0..n_ch).map(|_| libm::exp(cfg.channel_gain_jitter * rng::normal(&mut r))).collect();
        trials.push(TrialTruth {
            trial_index: k,
            start_time_s: start,
            cue_time_s: cue,
            onset_time_s: onset,
            footswitch_time_s: onset + FOOTSWITCH_LEAD_S,
            carrier_freq_hz,
            amplitude_scale,
            channel_gains,
            violation: false,
        });
        t = onset + p.walk_s + p.rest_s;
    }
    Ok(GroundTruth { session_id: cfg.session_id.clone(), duration_s: t + p.tail_s, block_breaks_s, session_gains, trials })
}

/// Moves `round(fraction · n)` randomly chosen onsets to 0.3–1.0 s before
/// their cue and marks them.
pub fn inject_protocol_violations(gt: &GroundTruth, fraction: f64, seed: u64) -> Result<GroundTruth> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(invalid(alloc::format!("violation fraction {fraction} outside [0, 1]")));
    }
    let mut out = gt.clone();
    let n = out.trials.len();
    let k = libm::round(fraction * n as f64) as usize;
    let mut r = rng::stream(seed, STREAM_VIOLATION, 0);
    // Partial Fisher-Yates over trial positions.
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + (rng::uniform(&mut r) * (n - i) as f64) as usize;
        order.swap(i, j.min(n - 1));
    }
    for &i in &order[..k] {
        let t = &mut out.trials[i];
        t.onset_time_s = t.cue_time_s - rng::uniform_in(&mut r, 0.3, 1.0);
        t.footswitch_time_s = t.onset_time_s + FOOTSWITCH_LEAD_S;
        t.violation = true;
    }
    Ok(out)
}

/// Plans and renders one session.
pub fn generate_session(cfg: &SynthConfig) -> Result<(Recording, GroundTruth)> {
    let gt = plan_session(cfg)?;
    let rec = render_session(cfg, &gt)?;
    Ok((rec, gt))
}
