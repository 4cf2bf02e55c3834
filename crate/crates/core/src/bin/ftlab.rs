use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ftlab::config::{ExperimentConfig, ExperimentKind};
use ftlab::experiments::run;
use ftlab::solver::SolveStatus;

/// Numerical laboratory for two-phase free transmission energies.
#[derive(Debug, Parser)]
#[command(name = "ftlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (defaults to `[experiment] out`, then `./out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Minimize the energy and write the field, history and report.
    Solve,
    /// Coefficient-jump sweep with exponent fits at the free boundary.
    Sweep,
    /// Finite-perimeter certificate for the positive phase.
    Perimeter,
    /// Oscillation decay and Hölder fits on a solved field.
    Regularity,
    /// Exact 1D minimizer compared against the solver.
    Oracle1d,
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Solve => ExperimentKind::Solve,
            Command::Sweep => ExperimentKind::Sweep,
            Command::Perimeter => ExperimentKind::Perimeter,
            Command::Regularity => ExperimentKind::Regularity,
            Command::Oracle1d => ExperimentKind::Oracle1d,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(SolveStatus::Converged) => 0,
        Ok(SolveStatus::MaxIter) => {
            eprintln!("ftlab: a solve stopped at the iteration limit");
            5
        }
        Err(e) => {
            eprintln!("ftlab: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cli: &Cli) -> ftlab::Result<SolveStatus> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| ftlab::Error::Config("--config PATH is required".into()))?;
    let mut config = ExperimentConfig::from_path(path)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.solver.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ftlab::Error::Config("--threads must be positive".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| ftlab::Error::Config(format!("cannot start thread pool: {e}")))?;
    let outcome = pool.install(|| run(&config, Some(cli.command.kind()), &out))?;
    print!("{}", outcome.report.render());
    Ok(outcome.status)
}
