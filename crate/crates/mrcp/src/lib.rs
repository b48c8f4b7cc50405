//! File formats, pipeline configuration and batch orchestration around
//! [`mrcp_core`].

pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
