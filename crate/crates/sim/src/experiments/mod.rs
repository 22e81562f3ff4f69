//! The six experiments behind the CLI subcommands. Each writes its
//! artifacts into a staging directory that is moved into place only when
//! the whole run succeeds.

pub mod common;
mod correlation;
mod e2e;
mod papr;
mod precode;
mod schedule;
mod stream;

use std::fs;
use std::path::{Path, PathBuf};

use jscc_phy::metrics::MetricsReport;

use crate::config::ExperimentConfig;
use crate::error::{io_err, SimResult};
use crate::report::{write_metrics_csv, write_metrics_json, Stamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Experiment {
    Papr,
    Correlation,
    Precode,
    E2e,
    Schedule,
    Stream,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Papr,
        Experiment::Correlation,
        Experiment::Precode,
        Experiment::E2e,
        Experiment::Schedule,
        Experiment::Stream,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Papr => "papr",
            Experiment::Correlation => "correlation",
            Experiment::Precode => "precode",
            Experiment::E2e => "e2e",
            Experiment::Schedule => "schedule",
            Experiment::Stream => "stream",
        }
    }
}

/// Where an experiment writes and how it stamps its files.
pub struct Run<'a> {
    pub cfg: &'a ExperimentConfig,
    pub stamp: Stamp,
    dir: PathBuf,
    files: Vec<String>,
}

impl Run<'_> {
    /// Path of a new artifact in the staging directory.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_owned());
        self.dir.join(name)
    }

    pub fn report(&self, experiment: Experiment) -> MetricsReport {
        MetricsReport::new(experiment.name(), &self.stamp.config_hash, self.stamp.seed)
    }

    /// Writes `<experiment>_metrics.json` and `<experiment>_metrics.csv`.
    pub fn write_metrics(&mut self, report: &MetricsReport) -> SimResult<()> {
        let json = self.file(&format!("{}_metrics.json", report.experiment));
        write_metrics_json(&json, report)?;
        let csv = self.file(&format!("{}_metrics.csv", report.experiment));
        write_metrics_csv(&csv, report)
    }
}

/// Runs one experiment and returns the artifact paths in `out_dir`. On
/// error nothing new is left behind.
pub fn run_experiment(kind: Experiment, cfg: &ExperimentConfig, out_dir: &Path) -> SimResult<Vec<PathBuf>> {
    cfg.validate()?;
    let stamp = Stamp {
        config_hash: cfg.hash()?,
        seed: cfg.seed,
    };
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let staging = out_dir.join(format!(".{}.partial", kind.name()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
    }
    fs::create_dir(&staging).map_err(io_err(&staging))?;
    let mut run = Run {
        cfg,
        stamp,
        dir: staging.clone(),
        files: Vec::new(),
    };
    let result = match kind {
        Experiment::Papr => papr::run(&mut run),
        Experiment::Correlation => correlation::run(&mut run),
        Experiment::Precode => precode::run(&mut run),
        Experiment::E2e => e2e::run(&mut run),
        Experiment::Schedule => schedule::run(&mut run),
        Experiment::Stream => stream::run(&mut run),
    };
    let finished = result.and_then(|()| {
        let mut moved = Vec::with_capacity(run.files.len());
        for name in &run.files {
            let dest = out_dir.join(name);
            if let Err(e) = fs::rename(staging.join(name), &dest) {
                for done in &moved {
                    let _ = fs::remove_file(done);
                }
                return Err(io_err(&dest)(e));
            }
            moved.push(dest);
        }
        Ok(moved)
    });
    if let Err(e) = fs::remove_dir_all(&staging) {
        log::warn!("could not remove {}: {e}", staging.display());
    }
    finished
}
