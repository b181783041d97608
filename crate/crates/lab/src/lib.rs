//! Experiment driver for Gaussian free field percolation on random regular
//! graphs: configuration, file formats, parallel replicas and the
//! experiments themselves.

pub mod config;
pub mod experiments;
pub mod io;
pub mod parallel;

use config::ConfigError;
use io::IoError;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Runtime(String),
}

impl LabError {
    /// Process exit status: 2 for configuration problems, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            _ => 3,
        }
    }
}
