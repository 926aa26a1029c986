//! Command-line entry point.
//!
//! Each subcommand names a task; the config document supplies the
//! parameters. `--seed` replaces the config's seed before the run id is
//! derived, so overridden runs register under their own id. Exit codes:
//! 0 success, 2 config error, 3 enumeration budget error, 4 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dgchain::config::{parse_config_with_task, parse_sweep, TaskKind, SWEEP_CELL_CAP};
use dgchain::tasks::{run_sweep, run_task, TaskError};

#[derive(Parser)]
#[command(
    name = "dgchain",
    version,
    about = "Long-range integer height chains: exact tables, Monte Carlo, entropy ledgers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the truncated finite-volume measure exactly
    Exact(RunArgs),
    /// Run the Metropolis chain and record observable series
    Sample(RunArgs),
    /// Compare exact step-transform entropy against its closed-form bound
    Ledger(RunArgs),
    /// Tabulate the cross-boundary coupling sum over box sizes
    Tailsum(RunArgs),
    /// Estimate center-site variance across window sizes
    Profile(RunArgs),
    /// Fit a power law to configured points
    Fit(RunArgs),
    /// Expand sweep axes in the config and run every cell
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the key=value experiment document
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding output.dir
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override, replacing run.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress per-run stdout reporting
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, args) = match &cli.command {
        Command::Exact(a) => (Some(TaskKind::Exact), a),
        Command::Sample(a) => (Some(TaskKind::Sample), a),
        Command::Ledger(a) => (Some(TaskKind::Ledger), a),
        Command::Tailsum(a) => (Some(TaskKind::Tailsum), a),
        Command::Profile(a) => (Some(TaskKind::Profile), a),
        Command::Fit(a) => (Some(TaskKind::Fit), a),
        Command::Sweep(a) => (None, a),
    };
    match run(task, args, matches!(cli.command, Command::Sweep(_))) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn run(task: Option<TaskKind>, args: &RunArgs, is_sweep: bool) -> Result<(), TaskError> {
    let text = std::fs::read_to_string(&args.config)?;

    if is_sweep {
        let mut spec = parse_sweep(&text, None, SWEEP_CELL_CAP)?;
        if let Some(seed) = args.seed {
            for cell in &mut spec.cells {
                cell.seed = seed;
            }
        }
        let out = args
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(&spec.cells[0].out_dir));
        let outcome = run_sweep(&spec, &out)?;
        if !args.quiet {
            for entry in &outcome.entries {
                println!("cell {} ok", entry.run_id);
            }
            for failure in &outcome.failures {
                println!(
                    "cell {} failed ({:?}): {}",
                    failure.run_id, failure.axis_values, failure.error
                );
            }
            println!(
                "sweep: {} ok, {} failed, summary {}",
                outcome.entries.len(),
                outcome.failures.len(),
                outcome.summary_path.display()
            );
        }
        for failure in &outcome.failures {
            eprintln!("cell {} failed: {}", failure.run_id, failure.error);
        }
        return Ok(());
    }

    let mut cfg = parse_config_with_task(&text, task)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
    let outcome = run_task(&cfg, &out)?;
    if !args.quiet {
        println!(
            "run {} task={} out={}",
            outcome.entry.run_id,
            outcome.entry.task.name(),
            outcome.out_dir.join(&outcome.entry.run_id).display()
        );
        for (key, value) in &outcome.entry.summary {
            println!("  {key} = {value}");
        }
    }
    Ok(())
}
