use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ruinkit::simulate::with_workers;
use ruinkit_cli::{run, worker_count, CliError, Command, Scenario};

/// Ruin probabilities under modified ruin definitions.
#[derive(Parser)]
#[command(name = "ruinkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the Cramér condition for the adjustment coefficient.
    SolveR(Common),
    /// Analytic and Monte Carlo ruin probabilities over the u grid.
    Asymptotics(Common),
    /// Empirical deficit law at the largest u against the limit law.
    Overshoot(Common),
    /// Raw Monte Carlo ruin estimates.
    Simulate(Common),
    /// The constants C, p0, q0 as a JSON report.
    Constant(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario file (JSON).
    #[arg(long)]
    scenario: PathBuf,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of simulated paths.
    #[arg(long)]
    paths: Option<u64>,
}

fn write_output(target: Option<&PathBuf>, text: &str) -> Result<(), CliError> {
    let res = match target {
        Some(path) => std::fs::write(path, text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    res.map_err(|e| CliError::Failed(format!("cannot write output: {e}")))
}

fn execute(cmd: Command, args: &Common) -> Result<(), CliError> {
    let workers = worker_count(std::env::var("RUINKIT_THREADS").ok().as_deref())?;
    let scenario = Scenario::load(&args.scenario)?.with_overrides(args.seed, args.paths)?;
    match with_workers(workers, || run(cmd, &scenario)) {
        Ok(text) => write_output(args.out.as_ref(), &text),
        Err(CliError::BudgetExceeded { message, partial }) => {
            write_output(args.out.as_ref(), &partial)?;
            Err(CliError::BudgetExceeded { message, partial: String::new() })
        }
        Err(e) => Err(e),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (cmd, args) = match &cli.command {
        Cmd::SolveR(a) => (Command::SolveR, a),
        Cmd::Asymptotics(a) => (Command::Asymptotics, a),
        Cmd::Overshoot(a) => (Command::Overshoot, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Constant(a) => (Command::Constant, a),
    };
    match execute(cmd, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
