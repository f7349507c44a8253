//! Experiment plumbing shared by the command-line driver and the tests.

pub mod artifacts;
pub mod config;
pub mod run;

pub use artifacts::{load_artifacts, save_artifacts, Artifacts};
pub use config::{EnvSection, ExperimentConfig, RegionSource};
pub use run::{at_budget, train, train_seed, transfer, TrainedRun, TransferReport};
