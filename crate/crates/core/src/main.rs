use clap::{Parser, Subcommand};
use ruinwalk::cli;
use std::path::PathBuf;
use std::process::ExitCode;

/// Rare-event simulation of heavy-tailed random walks conditioned on ruin.
#[derive(Parser)]
#[command(name = "ruinwalk", version, about)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides sim.output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides sim.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses the default pool (overrides sim.workers).
    #[arg(long)]
    workers: Option<usize>,
    /// Number of paths (overrides sim.n_paths).
    #[arg(long)]
    paths: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Importance-sampling estimate of the ruin probability.
    Estimate,
    /// Second-moment ratio and TV bound over a list of scales.
    TvCurve,
    /// Numerical verification of the Lyapunov drift inequality.
    VerifyLyapunov,
    /// Compare simulated conditional paths against the asymptotic laws.
    LimitLaws,
    /// Crude Monte Carlo frequency (and optional conditional sample).
    CrudeOracle,
    /// Dump full trajectories, one CSV row per step.
    SimulatePaths,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cmd = match args.command {
        Command::Estimate => cli::Subcommand::Estimate,
        Command::TvCurve => cli::Subcommand::TvCurve,
        Command::VerifyLyapunov => cli::Subcommand::VerifyLyapunov,
        Command::LimitLaws => cli::Subcommand::LimitLaws,
        Command::CrudeOracle => cli::Subcommand::CrudeOracle,
        Command::SimulatePaths => cli::Subcommand::SimulatePaths,
    };
    let overrides = cli::Overrides {
        out: args.out,
        seed: args.seed,
        workers: args.workers,
        paths: args.paths,
    };
    match cli::run(cmd, &args.config, &overrides) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("ruinwalk: statistical acceptance test failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("ruinwalk: error: {e}");
            ExitCode::from(1)
        }
    }
}
