//! Experiment runner: run configurations, presets, and SVG plots.

pub mod config;
pub mod plot;
pub mod presets;
pub mod runner;

use std::path::PathBuf;

use thiserror::Error;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "FDSMC_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "fdsmc-out";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}
