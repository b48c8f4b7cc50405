use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::rng::{normal, stream};
use super::{GroundTruth, SynthConfig, STREAM_EMG, STREAM_NOISE};
use crate::dsp::fft::{fft, ifft};
use crate::model::{Event, EventKind, Recording};
use crate::Result;

/// Half-width of the crossfade between consecutive trials' parameters.
const CROSSFADE_S: f64 = 0.5;
/// Steering is held this long after onset before it is released.
const HOLD_AFTER_ONSET_S: f64 = 0.5;
const EMG_DECAY_S: f64 = 0.3;

fn raised_cosine(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    0.5 - 0.5 * libm::cos(PI * u)
}

/// Unit negative deflection at time `tau` relative to onset: a linear ramp
/// from −lead to onset, then a smooth return to zero.
pub fn mrcp_template(tau: f64, lead_s: f64, recovery_s: f64) -> f64 {
    if tau <= -lead_s || lead_s == 0.0 && tau < 0.0 {
        0.0
    } else if tau <= 0.0 {
        -(tau + lead_s) / lead_s
    } else if tau < recovery_s {
        -(1.0 - raised_cosine(tau / recovery_s))
    } else {
        0.0
    }
}

/// Segment (trial) owning each sample, and the crossfade weight toward it
/// from the previous segment.
fn segment_weights(gt: &GroundTruth, n: usize, fs: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let t = i as f64 / fs;
        while k + 1 < gt.trials.len() && t >= gt.trials[k + 1].start_time_s - CROSSFADE_S {
            k += 1;
        }
        let w = if k == 0 { 1.0 } else { ((t - gt.trials[k].start_time_s + CROSSFADE_S) / (2.0 * CROSSFADE_S)).clamp(0.0, 1.0) };
        out.push((k, w));
    }
    out
}

fn blended(seg: &[(usize, f64)], i: usize, value: impl Fn(usize) -> f64) -> f64 {
    let (k, w) = seg[i];
    if w >= 1.0 || k == 0 {
        value(k)
    } else {
        (1.0 - w) * value(k - 1) + w * value(k)
    }
}

/// Instantaneous carrier phase (unwrapped) at every sample.
///
/// The free-running phase advances at each trial's carrier frequency. Around
/// each onset it is blended toward a target trajectory that rises linearly
/// from π/2 to the reset target at onset:
/// `θ = θ_free + w(τ)·(ψ(τ) − θ_free − 2πm)`, with the integer `m` fixed per
/// trial so the blend stays continuous.
pub fn carrier_phase(cfg: &SynthConfig, gt: &GroundTruth) -> Vec<f64> {
    let fs = cfg.fs;
    let n = n_samples(cfg, gt);
    let seg = segment_weights(gt, n, fs);
    let mut r = stream(cfg.seed, STREAM_NOISE, u64::MAX);
    let mut theta = Vec::with_capacity(n);
    let mut acc = 2.0 * PI * super::rng::uniform(&mut r);
    for &(k, _) in &seg {
        theta.push(acc);
        acc += 2.0 * PI * gt.trials[k].carrier_freq_hz / fs;
    }

    let lead = cfg.phase_reset_lead_s;
    let ramp = cfg.phase_ramp_s;
    let start_phase = PI / 2.0;
    let slope = if lead > 0.0 { (cfg.reset_target_phase_rad - start_phase) / lead } else { 0.0 };
    let target = |tau: f64| cfg.reset_target_phase_rad + slope * tau;
    for trial in &gt.trials {
        let onset = trial.onset_time_s;
        let first = libm::ceil((onset - lead) * fs).max(0.0) as usize;
        let last = (libm::floor((onset + HOLD_AFTER_ONSET_S + ramp) * fs) as usize).min(n.saturating_sub(1));
        if first > last {
            continue;
        }
        let mid = ((libm::round((onset - lead + ramp / 2.0) * fs)).max(0.0) as usize).min(last);
        let m = libm::round((target(mid as f64 / fs - onset) - theta[mid]) / (2.0 * PI));
        for i in first..=last {
            let tau = i as f64 / fs - onset;
            let w = if tau < -lead + ramp {
                raised_cosine((tau + lead) / ramp)
            } else if tau <= HOLD_AFTER_ONSET_S {
                1.0
            } else {
                1.0 - raised_cosine((tau - HOLD_AFTER_ONSET_S) / ramp)
            };
            theta[i] += w * (target(tau) - theta[i] - 2.0 * PI * m);
        }
    }
    theta
}

fn n_samples(cfg: &SynthConfig, gt: &GroundTruth) -> usize {
    libm::ceil(gt.duration_s * cfg.fs) as usize
}

/// Zero-mean noise with a 1/f^α power spectrum scaled to `rms`, plus a
/// white floor.
fn colored_noise(n: usize, fs: f64, alpha: f64, rms: f64, floor_db: f64, seed: u64, channel: u64) -> Vec<f64> {
    if rms == 0.0 {
        return vec![0.0; n];
    }
    let mut r = stream(seed, STREAM_NOISE, channel);
    let n2 = n.next_power_of_two();
    let mut buf: Vec<Complex64> = (0..n2).map(|_| Complex64::new(normal(&mut r), 0.0)).collect();
    fft(&mut buf);
    for (k, b) in buf.iter_mut().enumerate() {
        let f = k.min(n2 - k) as f64 * fs / n2 as f64;
        *b *= if k == 0 { 0.0 } else { libm::pow(f, -alpha / 2.0) };
    }
    ifft(&mut buf);
    let mut x: Vec<f64> = buf[..n].iter().map(|c| c.re).collect();
    let mean = x.iter().sum::<f64>() / n as f64;
    let cur = libm::sqrt(x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64);
    let white = rms * libm::pow(10.0, floor_db / 20.0);
    for v in x.iter_mut() {
        *v = (*v - mean) * rms / cur + white * normal(&mut r);
    }
    x
}

fn emg_envelope(tau: f64, cfg: &SynthConfig) -> f64 {
    let rise = cfg.emg_burst.rise_ms / 1000.0;
    let walk = cfg.protocol.walk_s;
    if tau < 0.0 || tau > walk + EMG_DECAY_S {
        0.0
    } else if tau < rise {
        tau / rise
    } else if tau <= walk {
        1.0
    } else {
        1.0 - (tau - walk) / EMG_DECAY_S
    }
}

/// Renders the EEG and EMG channels and the event markers for a planned session.
pub fn render_session(cfg: &SynthConfig, gt: &GroundTruth) -> Result<Recording> {
    cfg.validate()?;
    let fs = cfg.fs;
    let n = n_samples(cfg, gt);
    let seg = segment_weights(gt, n, fs);
    let theta = carrier_phase(cfg, gt);

    let reach = cfg.mrcp_onset_lead_s.max(cfg.mrcp_recovery_s) + 1.0;
    let mut source = vec![0.0; n];
    for (i, s) in source.iter_mut().enumerate() {
        *s = cfg.carrier_amplitude_uv * libm::cos(theta[i]);
    }
    for trial in &gt.trials {
        let first = libm::ceil((trial.onset_time_s - reach) * fs).max(0.0) as usize;
        let last = (libm::floor((trial.onset_time_s + reach) * fs) as usize).min(n - 1);
        for (i, s) in source.iter_mut().enumerate().take(last + 1).skip(first) {
            let tau = i as f64 / fs - trial.onset_time_s;
            *s += cfg.mrcp_amplitude_uv * mrcp_template(tau, cfg.mrcp_onset_lead_s, cfg.mrcp_recovery_s);
        }
    }
    for (i, s) in source.iter_mut().enumerate() {
        *s *= blended(&seg, i, |k| gt.trials[k].amplitude_scale);
    }

    let mut data = Vec::with_capacity(cfg.channels.len() + 1);
    for (c, name) in cfg.channels.iter().enumerate() {
        let topo = cfg.topography.get(name).copied().unwrap_or(0.0);
        let noise = colored_noise(n, fs, cfg.noise.exponent, cfg.noise.rms_uv, cfg.noise.white_floor_db, cfg.seed, c as u64);
        let g = gt.session_gains[c];
        data.push(
            (0..n)
                .map(|i| g * blended(&seg, i, |k| gt.trials[k].channel_gains[c]) * (topo * source[i] + noise[i]))
                .collect::<Vec<f64>>(),
        );
    }

    let mut r = stream(cfg.seed, STREAM_EMG, 0);
    let mut emg: Vec<f64> = (0..n).map(|_| cfg.emg_burst.baseline_mv * normal(&mut r)).collect();
    for trial in &gt.trials {
        let first = libm::ceil(trial.onset_time_s * fs).max(0.0) as usize;
        let span = cfg.protocol.walk_s + EMG_DECAY_S;
        let last = (libm::floor((trial.onset_time_s + span) * fs) as usize).min(n - 1);
        for (i, v) in emg.iter_mut().enumerate().take(last + 1).skip(first) {
            let e = emg_envelope(i as f64 / fs - trial.onset_time_s, cfg);
            *v += cfg.emg_burst.amplitude_mv * e * normal(&mut r);
        }
    }
    data.push(emg);

    let mut events = Vec::new();
    for t in &gt.trials {
        events.push(Event { kind: EventKind::Cue, time_s: t.cue_time_s, trial_index: t.trial_index });
        events.push(Event { kind: EventKind::Onset, time_s: t.onset_time_s, trial_index: t.trial_index });
        events.push(Event { kind: EventKind::FootswitchRelease, time_s: t.footswitch_time_s, trial_index: t.trial_index });
    }
    for &(k, time_s) in &gt.block_breaks_s {
        events.push(Event { kind: EventKind::BlockBreak, time_s, trial_index: k });
    }
    events.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));

    let mut names = cfg.channels.clone();
    names.push(cfg.emg_channel.clone());
    let emg_index = names.len() - 1;
    Recording::new(gt.session_id.clone(), fs, names, data, vec![emg_index], events)
}
