#![allow(dead_code)]

use std::path::{Path, PathBuf};

use mrcp::config::SubjectEntry;
use mrcp::PipelineConfig;
use mrcp_core::synth::{generate_session, GroundTruth, SynthConfig};

pub const CHANNELS: [&str; 3] = ["Cz", "C3", "C4"];

/// A short, three-channel session.
pub fn small_synth(session_id: &str, seed: u64) -> SynthConfig {
    let mut c = SynthConfig { session_id: session_id.into(), n_trials: 20, seed, drift_seed: seed, ..Default::default() };
    c.channels = CHANNELS.iter().map(|s| s.to_string()).collect();
    c.topography.retain(|k, _| CHANNELS.contains(&k.as_str()));
    c
}

pub fn write_session(dir: &Path, cfg: &SynthConfig) -> (PathBuf, GroundTruth) {
    let (rec, gt) = generate_session(cfg).unwrap();
    let prefix = dir.join(&cfg.session_id);
    mrcp::io::write_recording(&rec, &prefix).unwrap();
    (prefix, gt)
}

/// Writes `subjects × sessions` small sessions and returns a config over them
/// with a coarse grid and few folds.
pub fn small_study(dir: &Path, subjects: usize, sessions: usize) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    for s in 0..subjects {
        let id = format!("S{:02}", s + 1);
        let mut entry = SubjectEntry { id: id.clone(), sessions: Vec::new() };
        for k in 0..sessions {
            let synth = small_synth(&format!("{id}_session{}", k + 1), (s * 10 + k + 1) as u64);
            entry.sessions.push(write_session(dir, &synth).0);
        }
        cfg.subjects.push(entry);
    }
    coarse(&mut cfg);
    cfg.run.output_dir = dir.join("out");
    cfg
}

pub fn coarse(cfg: &mut PipelineConfig) {
    cfg.features.channels = CHANNELS.iter().map(|s| s.to_string()).collect();
    cfg.model.outer_folds = 3;
    cfg.model.inner_folds = 2;
    cfg.model.grid_points = 2;
    cfg.model.gamma_log2 = [-1.0, 1.0];
    cfg.model.c_log2 = [0.0, 2.0];
}
