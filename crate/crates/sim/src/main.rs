use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jscc_sim::report::verify_artifact;
use jscc_sim::{run_experiment, Experiment, ExperimentConfig, SimResult};

#[derive(Parser)]
#[command(name = "jscc-sim", version, about = "Analog feature transmission over OFDM: experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML experiment config; every field has a default.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// PAPR distributions with and without precoding and clipping.
    Papr(RunArgs),
    /// Feature and received-symbol correlation.
    Correlation(RunArgs),
    /// Optimize and save a precoding matrix.
    Precode(RunArgs),
    /// End-to-end SNR sweep.
    E2e(RunArgs),
    /// Feature capacity and retained channels across budgets.
    Schedule(RunArgs),
    /// Dual-worker streaming pipeline.
    Stream(RunArgs),
    /// Check that artifacts in a directory were produced by a config.
    Verify(RunArgs),
}

fn load(args: &RunArgs) -> SimResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn verify(args: &RunArgs) -> SimResult<usize> {
    let hash = load(args)?.hash()?;
    let mut checked = 0;
    let entries = std::fs::read_dir(&args.out).map_err(|source| jscc_sim::SimError::Io {
        path: args.out.clone(),
        source,
    })?;
    for entry in entries.flatten() {
        let path = entry.path();
        if matches!(path.extension().and_then(|e| e.to_str()), Some("csv" | "json")) {
            verify_artifact(&path, &hash)?;
            checked += 1;
        }
    }
    Ok(checked)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Papr(a) => (Experiment::Papr, a),
        Command::Correlation(a) => (Experiment::Correlation, a),
        Command::Precode(a) => (Experiment::Precode, a),
        Command::E2e(a) => (Experiment::E2e, a),
        Command::Schedule(a) => (Experiment::Schedule, a),
        Command::Stream(a) => (Experiment::Stream, a),
        Command::Verify(a) => {
            return match verify(a) {
                Ok(n) => {
                    println!("{n} artifacts match");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            };
        }
    };
    match load(args).and_then(|cfg| run_experiment(kind, &cfg, &args.out)) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
