//! hydroscale: hypothesis verification and small-noise asymptotics
//! experiments for abstract stochastic hydrodynamical systems.
//!
//! Exit codes: 0 all verdicts pass, 1 verdict failure, 2 usage error,
//! 3 numerical failure.

use clap::Parser;
use hydroscale_cli::config::{ExperimentConfig, ExperimentKind};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(
    name = "hydroscale",
    about = "Numerical experiments for stochastic hydrodynamical-type systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Subcommand, Debug)]
enum Command {
    /// Randomized verification of the structural hypotheses.
    Verify(RunArgs),
    /// Central-limit coupling across the eps grid.
    Clt(RunArgs),
    /// Moderate-deviation tail estimation.
    Mdp(RunArgs),
    /// Variational rate-function solve with beta extrapolation.
    Rate(RunArgs),
    /// Controlled-process convergence to the skeleton.
    Controlled(RunArgs),
    /// Time-increment modulus of the controlled process.
    Modulus(RunArgs),
    /// Strong self-convergence of the scheme under dyadic refinement.
    Convergence(RunArgs),
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads; overrides the config (0 = logical cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Scalar config overrides, path=value.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
    /// Dump per-replica binary paths under the run directory.
    #[arg(long)]
    dump_paths: bool,
    /// Output root directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Verify(a) => (ExperimentKind::Verify, a),
        Command::Clt(a) => (ExperimentKind::Clt, a),
        Command::Mdp(a) => (ExperimentKind::Mdp, a),
        Command::Rate(a) => (ExperimentKind::Rate, a),
        Command::Controlled(a) => (ExperimentKind::Controlled, a),
        Command::Modulus(a) => (ExperimentKind::Modulus, a),
        Command::Convergence(a) => (ExperimentKind::Convergence, a),
    };
    match execute(kind, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(RunError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(RunError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

enum RunError {
    Usage(String),
    Numerical(String),
}

fn execute(kind: ExperimentKind, args: &RunArgs) -> Result<bool, RunError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| RunError::Usage(format!("cannot read {}: {e}", args.config.display())))?;
    let mut overrides = Vec::with_capacity(args.set.len());
    for s in &args.set {
        let (path, value) = s
            .split_once('=')
            .ok_or_else(|| RunError::Usage(format!("--set needs PATH=VALUE, got '{s}'")))?;
        overrides.push((path.to_string(), value.to_string()));
    }
    let mut cfg = ExperimentConfig::parse(&text, &overrides)
        .map_err(|e| RunError::Usage(format!("{e:#}")))?;
    if cfg.kind != kind {
        return Err(RunError::Usage(format!(
            "config declares kind '{}' but the '{kind}' subcommand was invoked",
            cfg.kind
        )));
    }
    if let Some(jobs) = args.jobs {
        cfg.jobs = jobs;
    }
    let outcome = hydroscale_cli::run(&cfg, &args.out, args.dump_paths)
        .map_err(|e| RunError::Numerical(format!("{e:#}")))?;
    println!(
        "{} -> {} ({})",
        kind,
        if outcome.passed { "PASS" } else { "FAIL" },
        outcome.run_dir.display()
    );
    Ok(outcome.passed)
}
