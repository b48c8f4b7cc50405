//! Stages from raw sessions to evaluation reports.

use std::path::Path;
use std::sync::Mutex;

use log::{info, warn};
use mrcp_core::dsp::{design_butterworth_bandpass, filtfilt};
use mrcp_core::eval::{evaluate_predictions, EvaluationReport, Regime, TrialPrediction};
use mrcp_core::features::{build_dataset, permuted_labels, TrialWindows, ViewKind, WindowDataset};
use mrcp_core::learn::{
    cross_validate, fit_detectors, make_fold_plan_with, transfer_evaluate, AccessAudit, DetectorModel, ModelKind,
    Purpose, Selection, Views,
};
use mrcp_core::model::{slice_epoch, time_to_sample};
use mrcp_core::preprocess::{emg_envelope_power, onset_from_footswitch, onsets_from_envelope_power, reject_protocol_violations, OnsetMethod, OnsetResult, TrialTrace};
use mrcp_core::synth::derive_seed;
use mrcp_core::{Epoch, EventKind, Recording};
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, PreprocessSection};
use crate::error::{CliError, Result};
use crate::io;

const SEED_SHUFFLE: u64 = 11;
const SEED_CHANCE: u64 = 12;

/// Zero-phase band-pass of every channel: EEG through the wide band and
/// then the MRCP band, EMG through its own band.
pub fn filter_recording(rec: &Recording, pre: &PreprocessSection) -> mrcp_core::Result<Recording> {
    let fs = rec.sampling_rate_hz();
    let band = |b: [f64; 2]| design_butterworth_bandpass(pre.filter_order, b[0], b[1], fs);
    let wide = band(pre.eeg_wide_band_hz)?;
    let mrcp = band(pre.mrcp_band_hz)?;
    let emg = if rec.emg_channel_indices().is_empty() { None } else { Some(band(pre.emg_band_hz)?) };
    rec.map_channels(|i, row| {
        if rec.emg_channel_indices().contains(&i) {
            filtfilt(emg.as_ref().expect("designed when EMG channels exist"), row)
        } else {
            filtfilt(&mrcp, &filtfilt(&wide, row)?)
        }
    })
}

fn cue_times(rec: &Recording) -> Vec<(usize, f64)> {
    rec.events_of(EventKind::Cue).iter().map(|e| (e.trial_index, e.time_s)).collect()
}

/// Movement onset of every cued trial, with protocol violations flagged.
/// `rec` must already be filtered.
pub fn detect_onsets(rec: &Recording, pre: &PreprocessSection) -> mrcp_core::Result<Vec<OnsetResult>> {
    let cues = cue_times(rec);
    if cues.is_empty() {
        return Err(mrcp_core::Error::EmptyInput("no cue events"));
    }
    let onsets = match pre.onset_method {
        OnsetMethod::Footswitch => {
            let releases = rec.events_of(EventKind::FootswitchRelease);
            cues.iter()
                .map(|&(trial, _)| match releases.iter().find(|e| e.trial_index == trial) {
                    Some(e) => OnsetResult::accepted(trial, onset_from_footswitch(e.time_s), OnsetMethod::Footswitch),
                    None => missing(trial, OnsetMethod::Footswitch, "no footswitch release"),
                })
                .collect()
        }
        OnsetMethod::Emg => emg_onsets(rec, pre, &cues)?,
    };
    let cue_s: Vec<f64> = cues.iter().map(|c| c.1).collect();
    reject_protocol_violations(onsets, &cue_s)
}

fn missing(trial: usize, method: OnsetMethod, reason: &str) -> OnsetResult {
    OnsetResult {
        trial_index: trial,
        onset_time_s: f64::NAN,
        method,
        rejected: true,
        reject_reason: Some(reason.into()),
    }
}

fn emg_onsets(rec: &Recording, pre: &PreprocessSection, cues: &[(usize, f64)]) -> mrcp_core::Result<Vec<OnsetResult>> {
    let &ch = rec
        .emg_channel_indices()
        .first()
        .ok_or_else(|| mrcp_core::Error::InvalidRecording("EMG onset detection needs an EMG channel".into()))?;
    let fs = rec.sampling_rate_hz();
    // Envelope of the whole channel, so trace edges carry no transform artifacts.
    let row = emg_envelope_power(&rec.samples()[ch])?;
    let len = time_to_sample(pre.emg_window_s[1] - pre.emg_window_s[0], fs) as usize;
    let mut traces = Vec::new();
    let mut slot = Vec::with_capacity(cues.len());
    for &(trial, cue) in cues {
        let start = time_to_sample(cue + pre.emg_window_s[0], fs);
        if start < 0 || start as usize + len > row.len() {
            slot.push(None);
            continue;
        }
        let start = start as usize;
        slot.push(Some(traces.len()));
        traces.push(TrialTrace { trial_index: trial, start_time_s: start as f64 / fs, values: row[start..start + len].to_vec() });
    }
    let cfg = mrcp_core::preprocess::EmgOnsetConfig { cue_offset_s: -pre.emg_window_s[0], ..pre.emg };
    let found = if traces.is_empty() { Vec::new() } else { onsets_from_envelope_power(&traces, fs, &cfg)? };
    Ok(cues
        .iter()
        .zip(slot)
        .map(|(&(trial, _), s)| match s {
            Some(k) => found[k].clone(),
            None => missing(trial, OnsetMethod::Emg, "EMG window outside the recording"),
        })
        .collect())
}

/// Epochs of accepted trials; trials whose epoch leaves the recording are rejected.
pub fn cut_epochs(rec: &Recording, onsets: &mut [OnsetResult]) -> mrcp_core::Result<Vec<Epoch>> {
    let mut out = Vec::new();
    for o in onsets.iter_mut().filter(|o| !o.rejected) {
        match slice_epoch(rec, o.onset_time_s, o.trial_index) {
            Ok(e) => out.push(e),
            Err(mrcp_core::Error::EpochOutOfBounds { .. }) => {
                o.rejected = true;
                o.reject_reason = Some("epoch outside the recording".into());
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedTrial {
    pub trial_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub subject_id: String,
    pub session_id: String,
    pub n_cued: usize,
    pub n_accepted: usize,
    pub rejected: Vec<RejectedTrial>,
}

/// One session after preprocessing and feature extraction.
#[derive(Debug, Clone)]
pub struct PreparedSession {
    pub session_id: String,
    pub onsets: Vec<OnsetResult>,
    pub amplitude: WindowDataset,
    pub phase: WindowDataset,
}

impl PreparedSession {
    pub fn views(&self) -> Views<'_> {
        Views { amplitude: Some(&self.amplitude), phase: Some(&self.phase) }
    }

    pub fn summary(&self, subject_id: &str) -> SessionSummary {
        SessionSummary {
            subject_id: subject_id.to_owned(),
            session_id: self.session_id.clone(),
            n_cued: self.onsets.len(),
            n_accepted: self.amplitude.n_trials(),
            rejected: self
                .onsets
                .iter()
                .filter(|o| o.rejected)
                .map(|o| RejectedTrial {
                    trial_index: o.trial_index,
                    reason: o.reject_reason.clone().unwrap_or_default(),
                })
                .collect(),
        }
    }
}

/// Filter, onsets, rejection, epochs and both feature views for one session.
pub fn prepare_session(rec: &Recording, cfg: &PipelineConfig, context: &str) -> Result<(PreparedSession, Vec<Epoch>)> {
    let filtered = filter_recording(rec, &cfg.preprocess).map_err(CliError::stage("filter", context))?;
    let mut onsets = detect_onsets(&filtered, &cfg.preprocess).map_err(CliError::stage("onset", context))?;
    let epochs = cut_epochs(&filtered, &mut onsets).map_err(CliError::stage("epoch", context))?;
    if epochs.is_empty() {
        return Err(CliError::Stage {
            stage: "reject",
            context: context.to_owned(),
            source: mrcp_core::Error::EmptyInput("every trial was rejected"),
        });
    }
    let amplitude =
        build_dataset(ViewKind::Amplitude, &epochs, &cfg.features).map_err(CliError::stage("features", context))?;
    let phase = build_dataset(ViewKind::Phase, &epochs, &cfg.features).map_err(CliError::stage("features", context))?;
    Ok((PreparedSession { session_id: rec.session_id().to_owned(), onsets, amplitude, phase }, epochs))
}

/// Replaces the window labels of both views by one permutation.
pub fn shuffle_session_labels(s: &mut PreparedSession, seed: u64) -> mrcp_core::Result<()> {
    let labels = permuted_labels(&s.amplitude, seed);
    s.amplitude = s.amplitude.with_labels(&labels)?;
    s.phase = s.phase.with_labels(&labels)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct PreparedSubject {
    pub id: String,
    pub sessions: Vec<PreparedSession>,
}

/// Reads and prepares every configured session in order.
pub fn load_subjects(cfg: &PipelineConfig) -> Result<Vec<PreparedSubject>> {
    let mut out = Vec::new();
    for (si, subject) in cfg.subjects.iter().enumerate() {
        let recordings = subject.sessions.iter().map(|p| io::parse_recording(p)).collect::<Result<Vec<_>>>()?;
        out.push(prepare_subject(&subject.id, si, &recordings, cfg)?);
    }
    Ok(out)
}

/// Prepares the recordings of the `index`-th subject, shuffling labels when
/// the config asks for the control run.
pub fn prepare_subject(id: &str, index: usize, recordings: &[Recording], cfg: &PipelineConfig) -> Result<PreparedSubject> {
    let mut sessions = Vec::new();
    for (k, rec) in recordings.iter().enumerate() {
        let context = format!("subject {id} session {}", rec.session_id());
        let (mut s, _) = prepare_session(rec, cfg, &context)?;
        info!("{context}: {} of {} trials accepted", s.amplitude.n_trials(), s.onsets.len());
        if cfg.evaluation.shuffle_labels {
            let seed = derive_seed(cfg.run.seed, SEED_SHUFFLE, (index * 1000 + k) as u64);
            shuffle_session_labels(&mut s, seed).map_err(CliError::stage("shuffle", &context))?;
        }
        sessions.push(s);
    }
    Ok(PreparedSubject { id: id.to_owned(), sessions })
}

/// Which trials of which session a fitting or prediction step read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessRecord {
    /// Evaluation unit, e.g. `intersession/S01/s2`.
    pub unit: String,
    pub purpose: Purpose,
    pub subject_id: String,
    pub session_id: String,
    pub trial_index: usize,
}

/// Collects [`AccessRecord`]s from every fit and predict call of a run.
#[derive(Debug, Default)]
pub struct AccessLog {
    records: Mutex<Vec<AccessRecord>>,
}

impl AccessLog {
    pub fn records(&self) -> Vec<AccessRecord> {
        self.records.lock().expect("access log poisoned").clone()
    }
}

/// Audit for one evaluation unit; maps dataset trial indices back to sessions.
struct UnitAudit<'a> {
    log: &'a AccessLog,
    unit: String,
    /// `(subject, session, original trial)` by dataset trial index, or a
    /// single session when indices are the original ones.
    origin: Origin,
}

enum Origin {
    Session(String, String),
    Pooled(Vec<(String, String, usize)>),
}

impl AccessAudit for UnitAudit<'_> {
    fn record(&self, purpose: Purpose, trial_index: usize) {
        let (subject_id, session_id, trial_index) = match &self.origin {
            Origin::Session(a, b) => (a.clone(), b.clone(), trial_index),
            Origin::Pooled(map) => map[trial_index].clone(),
        };
        self.log.records.lock().expect("access log poisoned").push(AccessRecord {
            unit: self.unit.clone(),
            purpose,
            subject_id,
            session_id,
            trial_index,
        });
    }
}

/// Concatenates sessions of several subjects, renumbering trials by position.
fn pool_sessions(parts: &[(&str, &PreparedSession)]) -> mrcp_core::Result<(WindowDataset, WindowDataset, Vec<(String, String, usize)>)> {
    let mut origin = Vec::new();
    let mut amp = Vec::new();
    let mut phase = Vec::new();
    for (subject, s) in parts {
        for (a, p) in s.amplitude.trials().iter().zip(s.phase.trials()) {
            let g = origin.len();
            origin.push((subject.to_string(), s.session_id.clone(), a.trial_index));
            let renumber = |t: &TrialWindows| {
                let mut t = t.clone();
                t.trial_index = g;
                t.windows.iter_mut().for_each(|w| w.trial_index = g);
                t
            };
            amp.push(renumber(a));
            phase.push(renumber(p));
        }
    }
    let first = parts[0].1;
    Ok((
        WindowDataset::new(ViewKind::Amplitude, first.amplitude.channels().to_vec(), amp)?,
        WindowDataset::new(ViewKind::Phase, first.phase.channels().to_vec(), phase)?,
        origin,
    ))
}

/// A trained detector kept for later reuse.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub subject_id: String,
    pub train_sessions: Vec<String>,
    pub model: DetectorModel,
    pub selection: Selection,
}

#[derive(Debug, Default)]
pub struct RunOutput {
    pub reports: Vec<EvaluationReport>,
    pub sessions: Vec<SessionSummary>,
    pub models: Vec<FittedModel>,
}

fn kinds_present(kinds: &[ModelKind]) -> Vec<ModelKind> {
    let mut k = kinds.to_vec();
    k.sort();
    k.dedup();
    k
}

struct Evaluator<'a> {
    cfg: &'a PipelineConfig,
    kinds: Vec<ModelKind>,
    log: &'a AccessLog,
    out: RunOutput,
}

impl<'a> Evaluator<'a> {
    fn push(&mut self, regime: Regime, kind: ModelKind, subject: &str, test: &str, train: Vec<String>, preds: &[TrialPrediction], context: &str) -> Result<()> {
        let n = self.out.reports.len() as u64;
        let chance = self.cfg.evaluation.chance_config(derive_seed(self.cfg.run.seed, SEED_CHANCE, n));
        let evaluation =
            evaluate_predictions(preds, &self.cfg.features.spec, &chance).map_err(CliError::stage("evaluate", context))?;
        info!(
            "{context} {kind}: AUC {:.3}, trial accuracy {:.1}%",
            evaluation.metrics.auc, evaluation.metrics.trial_accuracy_pct
        );
        self.out.reports.push(EvaluationReport {
            regime,
            model_kind: kind.as_str().to_owned(),
            subject_id: subject.to_owned(),
            test_session: test.to_owned(),
            train_sessions: train,
            evaluation,
        });
        Ok(())
    }

    fn audit(&self, unit: String, origin: Origin) -> UnitAudit<'a> {
        UnitAudit { log: self.log, unit, origin }
    }

    fn intrasession(&mut self, subject: &PreparedSubject) -> Result<()> {
        let m = &self.cfg.model;
        for s in &subject.sessions {
            let context = format!("intrasession subject {} session {}", subject.id, s.session_id);
            let plan = make_fold_plan_with(s.amplitude.n_trials(), m.outer_folds, m.inner_folds, m.strict_forward)
                .map_err(CliError::stage("folds", &context))?;
            let audit = self.audit(
                format!("intrasession/{}/{}", subject.id, s.session_id),
                Origin::Session(subject.id.clone(), s.session_id.clone()),
            );
            let cv = cross_validate(&self.kinds, &s.views(), &plan, &m.train_config(), &audit)
                .map_err(CliError::stage("train", &context))?;
            for out in cv {
                self.push(Regime::Intrasession, out.kind, &subject.id, &s.session_id, vec![s.session_id.clone()], &out.predictions, &context)?;
            }
        }
        Ok(())
    }

    fn intersession(&mut self, subject: &PreparedSubject) -> Result<()> {
        for pair in subject.sessions.windows(2) {
            let (src, dst) = (&pair[0], &pair[1]);
            let context = format!("intersession subject {} {} -> {}", subject.id, src.session_id, dst.session_id);
            let unit = format!("intersession/{}/{}", subject.id, dst.session_id);
            let fit_audit = self.audit(unit.clone(), Origin::Session(subject.id.clone(), src.session_id.clone()));
            let fitted = fit_detectors(&self.kinds, &src.views(), &self.cfg.model.train_config(), &fit_audit)
                .map_err(CliError::stage("train", &context))?;
            let test_audit = self.audit(unit, Origin::Session(subject.id.clone(), dst.session_id.clone()));
            for (model, selection) in fitted {
                let preds = transfer_evaluate(&model, &dst.views(), &test_audit).map_err(CliError::stage("predict", &context))?;
                let kind = model.kind;
                self.push(Regime::Intersession, kind, &subject.id, &dst.session_id, vec![src.session_id.clone()], &preds, &context)?;
                self.out.models.push(FittedModel {
                    subject_id: subject.id.clone(),
                    train_sessions: vec![src.session_id.clone()],
                    model,
                    selection,
                });
            }
        }
        Ok(())
    }

    /// Leave one subject out, matching sessions by their position.
    fn intersubject(&mut self, subjects: &[PreparedSubject]) -> Result<()> {
        for (i, target) in subjects.iter().enumerate() {
            for (k, dst) in target.sessions.iter().enumerate() {
                let parts: Vec<(&str, &PreparedSession)> = subjects
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .filter_map(|(_, s)| s.sessions.get(k).map(|x| (s.id.as_str(), x)))
                    .collect();
                if parts.is_empty() {
                    continue;
                }
                let context = format!("intersubject subject {} session {}", target.id, dst.session_id);
                let (amp, phase, origin) = pool_sessions(&parts).map_err(CliError::stage("pool", &context))?;
                let train_names: Vec<String> = parts.iter().map(|(s, x)| format!("{s}/{}", x.session_id)).collect();
                let unit = format!("intersubject/{}/{}", target.id, dst.session_id);
                let fit_audit = self.audit(unit.clone(), Origin::Pooled(origin));
                let views = Views { amplitude: Some(&amp), phase: Some(&phase) };
                let fitted = fit_detectors(&self.kinds, &views, &self.cfg.model.train_config(), &fit_audit)
                    .map_err(CliError::stage("train", &context))?;
                let test_audit = self.audit(unit, Origin::Session(target.id.clone(), dst.session_id.clone()));
                for (model, _) in fitted {
                    let preds =
                        transfer_evaluate(&model, &dst.views(), &test_audit).map_err(CliError::stage("predict", &context))?;
                    self.push(Regime::Intersubject, model.kind, &target.id, &dst.session_id, train_names.clone(), &preds, &context)?;
                }
            }
        }
        Ok(())
    }
}

/// Runs every configured regime. Reports come out ordered by regime, then
/// subject, then session, then model kind.
pub fn evaluate_subjects(subjects: &[PreparedSubject], cfg: &PipelineConfig, log: &AccessLog) -> Result<RunOutput> {
    let mut ev = Evaluator { cfg, kinds: kinds_present(&cfg.model.kinds), log, out: RunOutput::default() };
    for s in subjects {
        for sess in &s.sessions {
            ev.out.sessions.push(sess.summary(&s.id));
        }
    }
    let regimes = &cfg.evaluation.regimes;
    if regimes.contains(&Regime::Intrasession) {
        for s in subjects {
            ev.intrasession(s)?;
        }
    }
    if regimes.contains(&Regime::Intersession) {
        for s in subjects {
            if s.sessions.len() < 2 {
                warn!("subject {} has one session; no intersession evaluation", s.id);
            }
            ev.intersession(s)?;
        }
    }
    if regimes.contains(&Regime::Intersubject) {
        if subjects.len() < 2 {
            warn!("one subject configured; no intersubject evaluation");
        } else {
            ev.intersubject(subjects)?;
        }
    }
    Ok(ev.out)
}

/// Full run from a config: returns the report document.
pub fn run_pipeline(cfg: &PipelineConfig, config_hash: &str, log: &AccessLog) -> Result<(io::ReportDocument, RunOutput)> {
    let subjects = load_subjects(cfg)?;
    let out = evaluate_subjects(&subjects, cfg, log)?;
    let doc = io::ReportDocument {
        schema_version: io::REPORT_SCHEMA_VERSION,
        seed: cfg.run.seed,
        config_hash: config_hash.to_owned(),
        sessions: out.sessions.clone(),
        reports: out.reports.clone(),
    };
    Ok((doc, out))
}

/// Writes `report.json`, `report.csv` and the trained intersession models.
pub fn write_outputs(doc: &io::ReportDocument, out: &RunOutput, cfg: &PipelineConfig, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut written = Vec::new();
    let p = dir.join("report.json");
    io::write_json(doc, &p)?;
    written.push(p);
    let p = dir.join("report.csv");
    io::write_report_csv(&doc.reports, &p)?;
    written.push(p);
    for m in &out.models {
        let name = format!("{}_{}_{}.json", m.subject_id, m.train_sessions.join("+"), m.model.kind.as_str());
        let p = dir.join("models").join(sanitize(&name));
        let d = io::ModelDocument::new(&cfg.features, &m.subject_id, m.train_sessions.clone(), m.model.clone(), m.selection);
        io::write_json(&d, &p)?;
        written.push(p);
    }
    Ok(written)
}

pub fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || "._+-".contains(c) { c } else { '_' }).collect()
}
