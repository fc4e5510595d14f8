use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tpflow_cli::{run, CliError, Command, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "tpflow",
    version,
    about = "Time-periodic flow around a translating, rotating body"
)]
struct Cli {
    /// TOML configuration file.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration value, e.g. `--set grid.n=64`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory, same as `--set output.dir=...`.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    action: Action,
}

#[derive(Subcommand, Debug)]
enum Action {
    /// Solve a linear or nonlinear problem.
    #[command(subcommand)]
    Solve(SolveKind),
    /// Run a verification suite.
    #[command(subcommand)]
    Verify(VerifyKind),
    /// Estimate ratios and fixed-point outcome over a list of Reynolds numbers.
    Sweep,
    /// Print the effective configuration.
    Config,
}

#[derive(Subcommand, Debug)]
enum SolveKind {
    Oseen,
    Rotating,
    Resolvent,
    Nonlinear,
}

#[derive(Subcommand, Debug)]
enum VerifyKind {
    Wiener,
    Embedding,
    Galerkin,
    Estimates,
}

fn command_of(action: &Action) -> Option<Command> {
    Some(match action {
        Action::Solve(SolveKind::Oseen) => Command::SolveOseen,
        Action::Solve(SolveKind::Rotating) => Command::SolveRotating,
        Action::Solve(SolveKind::Resolvent) => Command::SolveResolvent,
        Action::Solve(SolveKind::Nonlinear) => Command::SolveNonlinear,
        Action::Verify(VerifyKind::Wiener) => Command::VerifyWiener,
        Action::Verify(VerifyKind::Embedding) => Command::VerifyEmbedding,
        Action::Verify(VerifyKind::Galerkin) => Command::VerifyGalerkin,
        Action::Verify(VerifyKind::Estimates) => Command::VerifyEstimates,
        Action::Sweep => Command::Sweep,
        Action::Config => return None,
    })
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut overrides = cli.overrides;
    if let Some(dir) = &cli.output {
        overrides.push(format!("output.dir={:?}", dir.display().to_string()));
    }
    let config = RunConfig::load(cli.config.as_deref(), &overrides)?;
    let Some(command) = command_of(&cli.action) else {
        print!("{}", config.to_toml());
        return Ok(());
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(config.thread_count()?)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let report = run(command, &config)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for (k, v) in &report.summary {
        println!("{k} = {v:.6e}");
    }
    println!("wrote {} files to {}", report.outputs.len() + 1, report.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
