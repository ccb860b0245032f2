//! Experiment harness for the `alive-smc` crate.
//!
//! Runs the linear-Gaussian filtering comparisons, the normalizing-constant
//! variance study, the negative-binomial identity table and the PMMH runs
//! from a JSON config, and writes CSV tables plus a JSON manifest.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::Path;

use thiserror::Error;

pub mod config;
pub mod experiments;
pub mod output;
pub mod report;

pub use config::{ExperimentConfig, ExperimentId};
pub use experiments::{run_experiment, Manifest};
pub use report::{derive_seed, relative_variance_report, RelVarPoint};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Pmmh(#[from] alive_smc::pmmh::PmmhError),
    #[error("{0}")]
    Filter(String),
}

impl CliError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    /// Process exit code: 2 for configuration problems, 3 when a single
    /// run could not start or finish, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use alive_smc::pmmh::PmmhError;
        match self {
            CliError::Config(_) | CliError::Pmmh(PmmhError::InvalidConfig(_)) => 2,
            CliError::Pmmh(PmmhError::InitFailed { .. }) | CliError::Filter(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}
