mod common;

use std::path::Path;
use std::process::{Command, Output};

fn mrcp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrcp")).args(args).current_dir(cwd).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Synthesizes one subject with two short sessions through the CLI and
/// shrinks the generated pipeline config.
fn synth_study(dir: &Path) {
    let o = mrcp(
        &["--seed", "3", "--out", "data", "synth", "--sessions", "2", "--n-trials", "20", "--channels", "Cz,C3,C4"],
        dir,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let path = dir.join("data/pipeline.toml");
    let mut cfg: mrcp::PipelineConfig = toml::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    common::coarse(&mut cfg);
    std::fs::write(&path, toml::to_string(&cfg).unwrap()).unwrap();
}

#[test]
fn synth_then_pipeline_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_study(d);
    for f in ["S01_session1.header.csv", "S01_session2.data.csv", "S01_session1.truth.json", "run.json"] {
        assert!(d.join("data").join(f).exists(), "{f}");
    }

    let o = mrcp(&["--config", "data/pipeline.toml", "--out", "out", "pipeline"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = mrcp::io::read_report(&d.join("out/report.json")).unwrap();
    // One subject: intrasession on both sessions plus one intersession pair.
    assert_eq!(doc.reports.len(), 3 * 3);
    assert!(d.join("out/report.csv").exists());
    assert!(d.join("out/run.json").exists());
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("out/run.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "pipeline");
    assert_eq!(manifest["seed"], 3);

    let models: Vec<_> = std::fs::read_dir(d.join("out/models")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(models.len(), 3);

    let o = mrcp(&["--out", "tables", "report", "out/report.json"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let single = std::fs::read_to_string(d.join("tables/trial_accuracy.csv")).unwrap();
    assert_eq!(single.lines().count(), 1 + 9);

    let o = mrcp(&["--out", "tables2", "report", "out/report.json", "out/report.json"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let double = std::fs::read_to_string(d.join("tables2/trial_accuracy.csv")).unwrap();
    assert_eq!(double.lines().count(), 1 + 18);
    for f in ["roc_points.csv", "detection_latency.csv"] {
        assert!(d.join("tables2").join(f).exists(), "{f}");
    }
}

#[test]
fn staged_commands_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_study(d);
    let o = mrcp(&["--config", "data/pipeline.toml", "--out", "pp", "features"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.join("pp/preprocess/S01_S01_session1.onsets.csv").exists());
    assert!(d.join("pp/features/S01_S01_session2.phase.csv").exists());
    assert!(d.join("pp/preprocess/summary.json").exists());

    let o = mrcp(&["--config", "data/pipeline.toml", "--out", "tr", "train"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let model = d.join("tr/models/S01_S01_session1_phase.json");
    assert!(model.exists());

    let o = mrcp(&["--config", "data/pipeline.toml", "--out", "ev", "evaluate", model.to_str().unwrap()], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let doc = mrcp::io::read_report(&d.join("ev/report.json")).unwrap();
    // The model is skipped on its own training session.
    assert_eq!(doc.reports.len(), 1);
    assert_eq!(doc.reports[0].test_session, "S01_session2");
}

#[test]
fn missing_session_file_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("p.toml"), "[[subject]]\nid = \"S01\"\nsessions = [\"absent_run\"]\n").unwrap();
    let o = mrcp(&["--config", "p.toml", "preprocess"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("absent_run"), "{}", stderr(&o));
}

#[test]
fn bad_config_and_usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("p.toml"), "[run]\nbogus = 1\n").unwrap();
    assert_eq!(mrcp(&["--config", "p.toml", "pipeline"], d).status.code(), Some(2));
    assert_eq!(mrcp(&["pipeline"], d).status.code(), Some(2));
    let o = mrcp(&["report"], d);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(mrcp(&["frobnicate"], d).status.code(), Some(2));
}

#[test]
fn report_rejects_foreign_schema() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("r.json"), "{\"schema_version\": 999, \"reports\": []}").unwrap();
    let o = mrcp(&["--out", "t", "report", "r.json"], d);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("schema"), "{}", stderr(&o));
}

#[test]
fn malformed_data_row_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_study(d);
    let data = d.join("data/S01_session1.data.csv");
    let text = std::fs::read_to_string(&data).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[6] = "1.0,2.0";
    std::fs::write(&data, lines.join("\n")).unwrap();
    let o = mrcp(&["--config", "data/pipeline.toml", "--out", "pp", "preprocess"], d);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("S01_session1.data.csv:7:"), "{}", stderr(&o));
}
