//! Experiment orchestration: config files in, seeded trials through the Monte Carlo
//! machinery, reports out.
//!
//! The layering is strictly one-directional:
//! [`config`] turns a key/value file into a validated [`ExperimentConfig`];
//! [`trial`] runs one seeded closed-loop simulation end to end;
//! [`mc`] aggregates independent trials into deception/false-alarm rates;
//! [`sweep`] repeats that over a parameter grid and attaches analytic-bound columns;
//! [`emit`] serializes reports (CSV/JSON); [`cli`] is the thin command layer on top.

pub mod cli;
pub mod config;
pub mod emit;
pub mod mc;
pub mod sweep;
pub mod trial;

pub use cli::cli_main;
pub use config::{
    AttackKind, AttackSpec, BoundsSpec, ConfigError, DetectorKind, DetectorSpec,
    ExperimentConfig, MaliciousSpec, PlantSpec, RawConfig, SweepAxis, SweepSpec, SCHEMA_VERSION,
};
pub use emit::{emit_report, ReportFormat};
pub use mc::{monte_carlo, MonteCarloSummary};
pub use sweep::{sweep, SweepReport, SweepRow};
pub use trial::{run_trial, trial_seed, ModelEstimate, TrialOutcome};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] crate::core::CoreError),
    #[error(transparent)]
    Plant(#[from] crate::plant::PlantError),
    #[error(transparent)]
    Controller(#[from] crate::controller::ControllerError),
    #[error(transparent)]
    Attacker(#[from] crate::attacker::AttackerError),
    #[error(transparent)]
    Detector(#[from] crate::detector::DetectorError),
    #[error(transparent)]
    Bounds(#[from] crate::bounds::BoundsError),
    #[error("no valid trials: all {0} trials were marked invalid")]
    NoValidTrials(usize),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    /// Process exit code the CLI maps this error to: 1 for configuration problems
    /// (bad file, bad values, bad flags), 2 for failures at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 1,
            _ => 2,
        }
    }
}
