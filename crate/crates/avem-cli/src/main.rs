//! `avem`: adaptive virtual element experiments from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use avem_cli::{compare, run_experiment, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "avem", version, about = "Adaptive solver benchmarks on bisection meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one adaptive experiment and write its per-iteration history.
    Run(ExperimentArgs),
    /// Run the conforming and hanging-node variants back to back and write
    /// a joined history with a method column.
    Compare(ExperimentArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// Benchmark problem to solve.
    #[arg(long, default_value = "fichera")]
    problem: String,

    /// Exponent of the benchmark solution.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,

    /// Hanging-node depth budget; 0 keeps every mesh conforming.
    #[arg(long, default_value_t = 10)]
    lambda_max: u32,

    /// Bulk-marking parameter.
    #[arg(long, default_value_t = 0.5)]
    theta: f64,

    /// Stabilization weight.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,

    /// Stop once the global estimate falls below this.
    #[arg(long, default_value_t = 0.0)]
    tol: f64,

    /// Stop before a refinement would push the dof count past this.
    #[arg(long, default_value_t = 38_000)]
    max_dofs: usize,

    /// Relative residual tolerance of the linear solver.
    #[arg(long, default_value_t = 1e-10)]
    cg_tol: f64,

    /// Write the per-iteration table to this file.
    #[arg(long)]
    csv: Option<PathBuf>,

    /// Write VTK snapshots of solved states into this directory.
    #[arg(long)]
    vtk_dir: Option<PathBuf>,

    /// Snapshot cadence in iterations.
    #[arg(long, default_value_t = 1)]
    vtk_every: usize,

    /// Cap the worker threads used for assembly and estimation.
    #[arg(long)]
    threads: Option<usize>,
}

impl ExperimentArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            problem: self.problem.clone(),
            alpha: self.alpha,
            lambda_max: self.lambda_max,
            theta: self.theta,
            gamma: self.gamma,
            tol: self.tol,
            max_dofs: self.max_dofs,
            cg_tol: self.cg_tol,
            csv: self.csv.clone(),
            vtk_dir: self.vtk_dir.clone(),
            vtk_every: self.vtk_every,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = match &cli.command {
        Command::Run(args) | Command::Compare(args) => args,
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let outcome = match &cli.command {
        Command::Run(args) => run_experiment(&args.config()).map(|_| ()),
        Command::Compare(args) => compare(&args.config()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
