//! Pipeline configuration file (TOML).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use mrcp_core::eval::{ChanceConfig, ChanceMode, Regime};
use mrcp_core::features::FeatureConfig;
use mrcp_core::learn::{log2_grid, Grid, ModelKind, SmoConfig, TrainConfig};
use mrcp_core::preprocess::{EmgOnsetConfig, OnsetMethod};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 0, output_dir: PathBuf::from("out"), jobs: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectEntry {
    pub id: String,
    /// Session file prefixes in chronological order.
    pub sessions: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSection {
    pub onset_method: OnsetMethod,
    pub eeg_wide_band_hz: [f64; 2],
    pub mrcp_band_hz: [f64; 2],
    pub emg_band_hz: [f64; 2],
    /// Butterworth prototype order of every band-pass.
    pub filter_order: usize,
    /// EMG trace around each cue searched for the onset.
    pub emg_window_s: [f64; 2],
    /// Onset detector settings. `cue_offset_s` is always taken from
    /// `emg_window_s[0]`; a value given here is ignored.
    pub emg: EmgOnsetConfig,
}

impl Default for PreprocessSection {
    fn default() -> Self {
        Self {
            onset_method: OnsetMethod::Emg,
            eeg_wide_band_hz: [0.1, 30.0],
            mrcp_band_hz: [0.1, 1.0],
            emg_band_hz: [100.0, 125.0],
            filter_order: 2,
            emg_window_s: [-2.0, 6.0],
            emg: EmgOnsetConfig { cue_offset_s: 2.0, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kinds: Vec<ModelKind>,
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub strict_forward: bool,
    pub platt_folds: usize,
    /// log2 bounds of the γ and C axes.
    pub gamma_log2: [f64; 2],
    pub c_log2: [f64; 2],
    pub grid_points: usize,
    pub smo: SmoConfig,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kinds: ModelKind::ALL.to_vec(),
            outer_folds: 5,
            inner_folds: 5,
            strict_forward: false,
            platt_folds: 3,
            gamma_log2: [-5.0, 5.0],
            c_log2: [-5.0, 5.0],
            grid_points: 5,
            smo: SmoConfig::default(),
        }
    }
}

impl ModelSection {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            grid: Grid {
                gammas: log2_grid(self.gamma_log2[0], self.gamma_log2[1], self.grid_points),
                cs: log2_grid(self.c_log2[0], self.c_log2[1], self.grid_points),
            },
            outer_folds: self.outer_folds,
            inner_folds: self.inner_folds,
            strict_forward: self.strict_forward,
            smo: self.smo,
            platt_folds: self.platt_folds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub regimes: Vec<Regime>,
    pub chance_mode: ChanceMode,
    pub chance_alpha: f64,
    pub chance_permutations: usize,
    /// Permute window labels within each session before training (control run).
    pub shuffle_labels: bool,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            regimes: vec![Regime::Intrasession, Regime::Intersession, Regime::Intersubject],
            chance_mode: ChanceMode::Binomial,
            chance_alpha: 0.05,
            chance_permutations: 1000,
            shuffle_labels: false,
        }
    }
}

impl EvaluationSection {
    pub fn chance_config(&self, seed: u64) -> ChanceConfig {
        ChanceConfig { mode: self.chance_mode, alpha: self.chance_alpha, permutations: self.chance_permutations, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub run: RunSection,
    #[serde(rename = "subject")]
    pub subjects: Vec<SubjectEntry>,
    pub preprocess: PreprocessSection,
    pub features: FeatureConfig,
    pub model: ModelSection,
    pub evaluation: EvaluationSection,
}

fn check_band(name: &str, band: [f64; 2]) -> std::result::Result<(), String> {
    if band[0] > 0.0 && band[0] < band[1] {
        Ok(())
    } else {
        Err(format!("{name} = {band:?} must satisfy 0 < low < high"))
    }
}

impl PipelineConfig {
    /// Reads and validates a config file. Relative session paths are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|message| CliError::Config { path: path.to_owned(), message })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for s in &mut cfg.subjects {
            for p in &mut s.sessions {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        if cfg.run.output_dir.is_relative() {
            cfg.run.output_dir = base.join(&cfg.run.output_dir);
        }
        Ok((cfg, text))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.subjects.is_empty() {
            return Err("at least one [[subject]] is required".into());
        }
        let mut ids = BTreeSet::new();
        for s in &self.subjects {
            if !ids.insert(&s.id) {
                return Err(format!("subject id '{}' appears twice", s.id));
            }
            if s.sessions.is_empty() {
                return Err(format!("subject '{}' lists no sessions", s.id));
            }
        }
        let p = &self.preprocess;
        check_band("preprocess.eeg_wide_band_hz", p.eeg_wide_band_hz)?;
        check_band("preprocess.mrcp_band_hz", p.mrcp_band_hz)?;
        check_band("preprocess.emg_band_hz", p.emg_band_hz)?;
        if p.filter_order == 0 {
            return Err("preprocess.filter_order must be at least 1".into());
        }
        if p.emg_window_s[0] >= p.emg_window_s[1] {
            return Err("preprocess.emg_window_s must be increasing".into());
        }
        let m = &self.model;
        if m.kinds.is_empty() {
            return Err("model.kinds is empty".into());
        }
        if m.outer_folds < 2 || m.inner_folds < 2 {
            return Err("model.outer_folds and model.inner_folds must be at least 2".into());
        }
        if m.grid_points == 0 {
            return Err("model.grid_points must be positive".into());
        }
        if self.features.channels.is_empty() {
            return Err("features.channels is empty".into());
        }
        let e = &self.evaluation;
        if !(e.chance_alpha > 0.0 && e.chance_alpha < 1.0) {
            return Err("evaluation.chance_alpha must be in (0, 1)".into());
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form of the feature settings.
    pub fn feature_config_hash(&self) -> String {
        hash_json(&self.features)
    }
}

pub fn hash_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types serialize");
    hex(&Sha256::digest(bytes))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[[subject]]
id = "S01"
sessions = ["a", "b"]
"#;

    #[test]
    fn defaults_fill_in() {
        let c = PipelineConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.subjects[0].sessions.len(), 2);
        assert_eq!(c.features.decimation, 16);
        assert_eq!(c.model.kinds.len(), 3);
        assert_eq!(c.model.train_config().grid, Grid::default());
    }

    #[test]
    fn unknown_keys_are_reported_with_location() {
        let err = PipelineConfig::parse(&format!("{MINIMAL}\n[model]\nkernel = \"linear\"\n")).unwrap_err();
        assert!(err.contains("kernel"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn semantic_checks() {
        assert!(PipelineConfig::parse("").is_err());
        let bad = format!("{MINIMAL}\n[preprocess]\nmrcp_band_hz = [1.0, 0.1]\n");
        assert!(PipelineConfig::parse(&bad).unwrap_err().contains("mrcp_band_hz"));
    }
}
