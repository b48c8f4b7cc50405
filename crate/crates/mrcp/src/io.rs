//! Session files, feature tables, model and report documents.
//!
//! A session with prefix `p` is stored as three CSV files:
//! `p.header.csv` (`key,value` rows), `p.data.csv` (one row per sample,
//! columns in channel order, no header) and `p.events.csv`
//! (`kind,time_s,trial_index`). Numbers are written in shortest round-trip
//! form so a write/parse cycle is bit-exact.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mrcp_core::eval::EvaluationReport;
use mrcp_core::features::{FeatureConfig, WindowDataset};
use mrcp_core::learn::{DetectorModel, Selection};
use mrcp_core::{Event, EventKind, Recording};
use serde::{Deserialize, Serialize};

use crate::config::hash_json;
use crate::error::{CliError, Result};
use crate::pipeline::SessionSummary;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub fn header_path(prefix: &Path) -> PathBuf {
    with_suffix(prefix, ".header.csv")
}

pub fn data_path(prefix: &Path) -> PathBuf {
    with_suffix(prefix, ".data.csv")
}

pub fn events_path(prefix: &Path) -> PathBuf {
    with_suffix(prefix, ".events.csv")
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn open_csv(path: &Path, headers: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(headers).flexible(true).from_reader(file))
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> CliError {
    CliError::Parse { path: path.to_owned(), line, message: message.into() }
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    parse_err(path, line, e.to_string())
}

fn finish(path: &Path, mut w: impl Write) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn split_names(s: &str) -> Vec<String> {
    s.split(';').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn parse_f64(path: &Path, line: u64, field: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| parse_err(path, line, format!("not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite value {field:?}")));
    }
    Ok(v)
}

/// Reads the three files of a session.
pub fn parse_recording(prefix: &Path) -> Result<Recording> {
    let hp = header_path(prefix);
    let mut fs = None;
    let mut session_id = None;
    let mut channels = None;
    let mut emg = None;
    let mut rd = open_csv(&hp, false)?;
    for rec in rd.records() {
        let rec = rec.map_err(|e| csv_err(&hp, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(parse_err(&hp, line, format!("expected key,value but found {} fields", rec.len())));
        }
        let value = rec[1].trim();
        match rec[0].trim() {
            "sampling_rate_hz" => fs = Some(parse_f64(&hp, line, value)?),
            "session_id" => session_id = Some(value.to_owned()),
            "channels" => channels = Some(split_names(value)),
            "emg_channels" => emg = Some(split_names(value)),
            other => return Err(parse_err(&hp, line, format!("unknown header key {other:?}"))),
        }
    }
    let fs = fs.ok_or_else(|| parse_err(&hp, 0, "missing sampling_rate_hz"))?;
    let channels = channels.ok_or_else(|| parse_err(&hp, 0, "missing channels"))?;
    let emg_names = emg.unwrap_or_default();
    let mut emg_idx = Vec::with_capacity(emg_names.len());
    for name in &emg_names {
        let i = channels
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| parse_err(&hp, 0, format!("EMG channel {name:?} is not among the channels")))?;
        emg_idx.push(i);
    }
    let session_id = session_id.unwrap_or_else(|| {
        prefix.file_name().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
    });

    let dp = data_path(prefix);
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); channels.len()];
    let mut rd = open_csv(&dp, false)?;
    for rec in rd.records() {
        let rec = rec.map_err(|e| csv_err(&dp, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != channels.len() {
            return Err(parse_err(&dp, line, format!("expected {} columns, found {}", channels.len(), rec.len())));
        }
        for (row, field) in samples.iter_mut().zip(rec.iter()) {
            row.push(parse_f64(&dp, line, field)?);
        }
    }

    let ep = events_path(prefix);
    let mut events = Vec::new();
    let mut rd = open_csv(&ep, true)?;
    let want = ["kind", "time_s", "trial_index"];
    let headers = rd.headers().map_err(|e| csv_err(&ep, e))?;
    if headers.iter().map(str::trim).ne(want) {
        return Err(parse_err(&ep, 1, format!("expected header {}", want.join(","))));
    }
    for rec in rd.records() {
        let rec = rec.map_err(|e| csv_err(&ep, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(parse_err(&ep, line, format!("expected 3 fields, found {}", rec.len())));
        }
        let kind: EventKind = rec[0].parse().map_err(|e: mrcp_core::Error| parse_err(&ep, line, e.to_string()))?;
        let time_s = parse_f64(&ep, line, &rec[1])?;
        let trial_index = rec[2]
            .trim()
            .parse()
            .map_err(|_| parse_err(&ep, line, format!("bad trial index {:?}", &rec[2])))?;
        events.push(Event { kind, time_s, trial_index });
    }

    Recording::new(session_id, fs, channels, samples, emg_idx, events)
        .map_err(|e| parse_err(&dp, 0, e.to_string()))
}

/// Writes a session as three files next to `prefix`.
pub fn write_recording(rec: &Recording, prefix: &Path) -> Result<()> {
    let hp = header_path(prefix);
    let mut w = create(&hp)?;
    let emg: Vec<&str> = rec.emg_channel_indices().iter().map(|&i| rec.channel_names()[i].as_str()).collect();
    let text = format!(
        "sampling_rate_hz,{}\nsession_id,{}\nchannels,{}\nemg_channels,{}\n",
        rec.sampling_rate_hz(),
        rec.session_id(),
        rec.channel_names().join(";"),
        emg.join(";")
    );
    w.write_all(text.as_bytes()).map_err(|e| CliError::io(&hp, e))?;
    finish(&hp, w)?;

    let dp = data_path(prefix);
    let mut w = create(&dp)?;
    let mut line = String::new();
    for t in 0..rec.n_samples() {
        line.clear();
        for (c, row) in rec.samples().iter().enumerate() {
            if c > 0 {
                line.push(',');
            }
            use std::fmt::Write as _;
            let _ = write!(line, "{}", row[t]);
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| CliError::io(&dp, e))?;
    }
    finish(&dp, w)?;

    let ep = events_path(prefix);
    let mut w = csv::Writer::from_writer(create(&ep)?);
    let io = |e: csv::Error| CliError::Internal(format!("{}: {e}", ep.display()));
    w.write_record(["kind", "time_s", "trial_index"]).map_err(io)?;
    for ev in rec.events() {
        w.write_record([ev.kind.as_str().to_owned(), ev.time_s.to_string(), ev.trial_index.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(&ep, e))
}

/// Feature table: `trial_index, window_index, label, center_s, f1..fD`.
pub fn write_dataset_csv(ds: &WindowDataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| CliError::Internal(format!("{}: {e}", path.display()));
    let mut header = vec!["trial_index".to_owned(), "window_index".into(), "label".into(), "center_s".into()];
    header.extend((1..=ds.dim()).map(|i| format!("f{i}")));
    w.write_record(&header).map_err(err)?;
    for t in ds.trials() {
        for v in &t.windows {
            let mut row = vec![
                v.trial_index.to_string(),
                v.window_index.to_string(),
                v.label.as_str().to_owned(),
                v.window_center_s.to_string(),
            ];
            row.extend(v.values.iter().map(f64::to_string));
            w.write_record(&row).map_err(err)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub feature_config_hash: String,
    pub feature_config: FeatureConfig,
    pub subject_id: String,
    pub train_sessions: Vec<String>,
    pub selection: Selection,
    pub model: DetectorModel,
}

impl ModelDocument {
    pub fn new(
        feature_config: &FeatureConfig,
        subject_id: &str,
        train_sessions: Vec<String>,
        model: DetectorModel,
        selection: Selection,
    ) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            feature_config_hash: hash_json(feature_config),
            feature_config: feature_config.clone(),
            subject_id: subject_id.to_owned(),
            train_sessions,
            selection,
            model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub sessions: Vec<SessionSummary>,
    pub reports: Vec<EvaluationReport>,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))?;
    w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    finish(path, w)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))
}

pub fn read_model(path: &Path) -> Result<ModelDocument> {
    let v: serde_json::Value = read_json(path)?;
    match v.get("format_version").and_then(|v| v.as_u64()) {
        Some(n) if n == u64::from(MODEL_FORMAT_VERSION) => {}
        other => {
            return Err(parse_err(path, 0, format!("model format version {other:?}, expected {MODEL_FORMAT_VERSION}")))
        }
    }
    serde_json::from_value(v).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn read_report(path: &Path) -> Result<ReportDocument> {
    let v: serde_json::Value = read_json(path)?;
    match v.get("schema_version").and_then(|v| v.as_u64()) {
        Some(n) if n == u64::from(REPORT_SCHEMA_VERSION) => {}
        other => {
            return Err(parse_err(path, 0, format!("report schema version {other:?}, expected {REPORT_SCHEMA_VERSION}")))
        }
    }
    serde_json::from_value(v).map_err(|e| parse_err(path, 0, e.to_string()))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per subject, test session, model and regime.
pub fn write_report_csv(reports: &[EvaluationReport], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| CliError::Internal(format!("{}: {e}", path.display()));
    w.write_record([
        "subject_id",
        "test_session",
        "model",
        "regime",
        "train_sessions",
        "n_trials",
        "n_windows",
        "auc",
        "kappa",
        "window_accuracy_pct",
        "chance_level_pct",
        "trial_accuracy_pct",
        "mean_detection_time_s",
        "tp",
        "fn",
        "fp",
        "tn",
    ])
    .map_err(err)?;
    for r in reports {
        let m = &r.evaluation.metrics;
        w.write_record([
            r.subject_id.clone(),
            r.test_session.clone(),
            r.model_kind.clone(),
            r.regime.as_str().to_owned(),
            r.train_sessions.join(";"),
            m.n_trials.to_string(),
            m.n_windows.to_string(),
            m.auc.to_string(),
            m.kappa.to_string(),
            m.window_accuracy_pct.to_string(),
            m.chance_level_pct.to_string(),
            m.trial_accuracy_pct.to_string(),
            opt(m.mean_detection_time_s),
            m.confusion.tp.to_string(),
            m.confusion.fn_.to_string(),
            m.confusion.fp.to_string(),
            m.confusion.tn.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// ROC points, trial accuracy and detection latency tables aggregated over reports.
pub fn write_report_tables(reports: &[EvaluationReport], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let key = |r: &EvaluationReport| {
        [r.subject_id.clone(), r.test_session.clone(), r.model_kind.clone(), r.regime.as_str().to_owned()]
    };
    let mut sorted: Vec<&EvaluationReport> = reports.iter().collect();
    sorted.sort_by_key(|r| key(r));
    let key_cols = ["subject_id", "test_session", "model", "regime"];

    let roc_path = out_dir.join("roc_points.csv");
    let mut w = csv::Writer::from_writer(create(&roc_path)?);
    let err = |p: &Path, e: csv::Error| CliError::Internal(format!("{}: {e}", p.display()));
    w.write_record(key_cols.iter().copied().chain(["fpr", "tpr", "threshold"])).map_err(|e| err(&roc_path, e))?;
    for r in &sorted {
        for p in &r.evaluation.roc.points {
            let mut row = key(r).to_vec();
            row.extend([p.fpr.to_string(), p.tpr.to_string(), opt(p.threshold)]);
            w.write_record(&row).map_err(|e| err(&roc_path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(&roc_path, e))?;

    let acc_path = out_dir.join("trial_accuracy.csv");
    let mut w = csv::Writer::from_writer(create(&acc_path)?);
    w.write_record(key_cols.iter().copied().chain([
        "n_trials",
        "trial_accuracy_pct",
        "window_accuracy_pct",
        "chance_level_pct",
        "auc",
        "kappa",
    ]))
    .map_err(|e| err(&acc_path, e))?;
    for r in &sorted {
        let m = &r.evaluation.metrics;
        let mut row = key(r).to_vec();
        row.extend([
            m.n_trials.to_string(),
            m.trial_accuracy_pct.to_string(),
            m.window_accuracy_pct.to_string(),
            m.chance_level_pct.to_string(),
            m.auc.to_string(),
            m.kappa.to_string(),
        ]);
        w.write_record(&row).map_err(|e| err(&acc_path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&acc_path, e))?;

    let lat_path = out_dir.join("detection_latency.csv");
    let mut w = csv::Writer::from_writer(create(&lat_path)?);
    w.write_record(key_cols.iter().copied().chain(["trial_index", "correct", "detection_time_s"]))
        .map_err(|e| err(&lat_path, e))?;
    for r in &sorted {
        for t in &r.evaluation.trials {
            let mut row = key(r).to_vec();
            row.extend([t.trial_index.to_string(), t.correct.to_string(), opt(t.detection_time_s)]);
            w.write_record(&row).map_err(|e| err(&lat_path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(&lat_path, e))?;
    Ok(vec![roc_path, acc_path, lat_path])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Recording {
        let ev = vec![
            Event { kind: EventKind::Cue, time_s: 0.01, trial_index: 0 },
            Event { kind: EventKind::Onset, time_s: 0.03, trial_index: 0 },
        ];
        let samples = vec![
            (0..10).map(|i| i as f64 * 0.1).collect(),
            (0..10).map(|i| -(i as f64) / 3.0).collect(),
            (0..10).map(|i| 1e-300 * i as f64).collect(),
        ];
        Recording::new("s1", 256.0, vec!["Cz".into(), "C3".into(), "EMG".into()], samples, vec![2], ev).unwrap()
    }

    #[test]
    fn three_channel_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s1");
        write_recording(&tiny(), &p).unwrap();
        let back = parse_recording(&p).unwrap();
        assert_eq!(back.samples().len(), 3);
        assert_eq!(back.n_samples(), 10);
        assert_eq!(back, tiny());
    }

    #[test]
    fn short_row_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s1");
        write_recording(&tiny(), &p).unwrap();
        let text = std::fs::read_to_string(data_path(&p)).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[4] = "1.0,2.0";
        std::fs::write(data_path(&p), lines.join("\n")).unwrap();
        match parse_recording(&p) {
            Err(CliError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_emg_channel() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s1");
        write_recording(&tiny(), &p).unwrap();
        let h = std::fs::read_to_string(header_path(&p)).unwrap().replace("emg_channels,EMG", "emg_channels,X");
        std::fs::write(header_path(&p), h).unwrap();
        let err = parse_recording(&p).unwrap_err();
        assert!(err.to_string().contains("\"X\""), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn missing_file_is_user_error() {
        let err = parse_recording(Path::new("/nonexistent/session")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("/nonexistent/session.header.csv"));
    }
}
