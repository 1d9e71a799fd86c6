//! Configuration, orchestration and file output for the `eth-lab` command.

pub mod config;
pub mod memory;
pub mod output;
pub mod pipeline;

use eth_core::consistency::ConsistencyError;
use eth_core::eth_stats::StatsError;
use eth_core::model_ops::ModelError;
use eth_core::spectral::cache::CacheError;
use eth_core::spectral::SpectralError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Consistency(#[from] ConsistencyError),
    #[error("cache: {0}")]
    Cache(#[from] CacheError),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("output: {0}")]
    Csv(#[from] csv::Error),
    #[error("output: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 1 for a failed validation, 2 for everything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            _ => 2,
        }
    }
}
