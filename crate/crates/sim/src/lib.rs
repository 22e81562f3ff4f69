//! Experiment runner, file formats and real-time streaming harness built
//! on the `jscc-phy` baseband crate.

pub mod config;
pub mod error;
pub mod experiments;
pub mod files;
pub mod report;
pub mod stream;

pub use config::ExperimentConfig;
pub use error::{SimError, SimResult};
pub use experiments::{run_experiment, Experiment};
