//! `run.json`: what produced an output directory.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub config_path: Option<PathBuf>,
    pub config_hash: Option<String>,
    pub seed: u64,
    pub versions: Versions,
    /// Seconds since the Unix epoch when the run started.
    pub started_unix_s: u64,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub mrcp: &'static str,
    pub mrcp_core: &'static str,
}

impl Manifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_owned(),
            config_path: None,
            config_hash: None,
            seed,
            versions: Versions { mrcp: env!("CARGO_PKG_VERSION"), mrcp_core: env!("CARGO_PKG_VERSION") },
            started_unix_s: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let p = dir.join("run.json");
        crate::io::write_json(self, &p)?;
        Ok(p)
    }
}
