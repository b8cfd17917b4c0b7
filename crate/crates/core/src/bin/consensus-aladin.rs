use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use consensus_aladin::harness::{self, HarnessError, RunConfig};
use consensus_aladin::problem::ProblemKind;
use consensus_aladin::Algorithm;

/// Consensus ALADIN and consensus ADMM experiments on seeded problems.
#[derive(Debug, Parser)]
#[command(name = "consensus-aladin", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one algorithm and write its per-round CSV trace.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// bfgs-aladin, reduced-aladin, matrix-prox-aladin, admm-dual-first or admm-aggregate-first
        #[arg(long, default_value = "bfgs-aladin")]
        algo: Algorithm,
    },
    /// Run several algorithms on the same instance and write one residual column each.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated list of algorithms.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "bfgs-aladin,reduced-aladin,admm-aggregate-first"
        )]
        algo: Vec<Algorithm>,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// quadratic, pseudo-huber or sensor-allocation
    #[arg(long, default_value = "sensor-allocation")]
    problem: ProblemKind,
    /// Number of agents.
    #[arg(long = "N", default_value_t = 20)]
    agents: usize,
    /// Variable dimension (sensor-allocation requires 10).
    #[arg(long = "n", default_value_t = 10)]
    dim: usize,
    /// Proximal weight.
    #[arg(long, default_value_t = 100.0)]
    rho: f64,
    /// Number of rounds.
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Update the BFGS Hessians only at rounds K, K², K³, ...
    #[arg(long, value_name = "K")]
    hessian_schedule: Option<u64>,
    /// Local subproblem gradient tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Stop early once the consensus residual is at or below this (0 disables).
    #[arg(long, default_value_t = 0.0)]
    stop_tol: f64,
    /// Threads for the local solves [default: min(N, available cores)].
    #[arg(long)]
    threads: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Standard deviation of the sensor measurements.
    #[arg(long, default_value_t = 5.0)]
    data_std: f64,
    /// Write measured wall-clock time instead of 0 in the wall_ms column.
    #[arg(long)]
    record_wall_time: bool,
    /// Compute a multi-start local reference so the energy column is filled
    /// for problems without a known solution.
    #[arg(long)]
    multistart_reference: bool,
}

impl CommonArgs {
    fn config(&self, algorithm: Algorithm) -> RunConfig {
        RunConfig {
            problem: self.problem,
            agents: self.agents,
            dim: self.dim,
            seed: self.seed,
            data_std: self.data_std,
            algorithm,
            rho: self.rho,
            max_iter: self.max_iter,
            hessian_schedule: self.hessian_schedule,
            tol: self.tol,
            stop_tol: self.stop_tol,
            threads: self.threads,
            record_wall_time: self.record_wall_time,
            multistart_reference: self.multistart_reference,
        }
    }
}

fn emit(out: Option<&PathBuf>, csv: &str) -> Result<(), String> {
    match out {
        Some(path) => fs::write(path, csv).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => std::io::stdout()
            .lock()
            .write_all(csv.as_bytes())
            .map_err(|e| format!("cannot write to stdout: {e}")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, out) = match &cli.command {
        Command::Run { common, algo } => (
            harness::run(&common.config(*algo)).map(|o| o.to_csv()),
            common.out.as_ref(),
        ),
        Command::Compare { common, algo } => {
            let configs: Vec<RunConfig> = algo.iter().map(|a| common.config(*a)).collect();
            (harness::compare(&configs).map(|o| o.to_csv()), common.out.as_ref())
        }
    };
    let csv = match result {
        Ok(csv) => csv,
        Err(err) => {
            eprintln!("error: {err}");
            let mut source = std::error::Error::source(&err);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            return ExitCode::from(exit_code(&err));
        }
    };
    if let Err(msg) = emit(out, &csv) {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}

fn exit_code(err: &HarnessError) -> u8 {
    err.exit_code() as u8
}
