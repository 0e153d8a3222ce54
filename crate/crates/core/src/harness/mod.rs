//! Configuration, experiment presets, parameter sweeps and CSV output.

mod config;
mod output;
mod presets;
mod runner;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{parse_config, ConfigError, ExperimentConfig, Sweep, SweepKey};
pub use output::{ResultRow, ResultTable, COLUMNS};
pub use presets::{run_preset, Preset};
pub use runner::{run_experiment, Runner, Series};

use crate::link::LinkError;
use crate::medium::MediumError;
use crate::transport::TransportError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Medium(#[from] MediumError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Worker count used when neither the configuration nor the caller sets one.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
