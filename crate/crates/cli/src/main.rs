use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ldgpflow_cli::{check_thread_env, run_check, run_solve, run_study, CliError, RunConfig, Table};

/// LDG solver for steady p-Stokes / p-Navier-Stokes flows with a
/// manufactured-solution convergence harness.
///
/// Settings are `key = value` pairs, read from `--config` and then from the
/// trailing `--key value` (or `key=value`) arguments.
#[derive(Parser)]
#[command(name = "ldgpflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
    /// `--key value` overrides.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "SETTINGS")]
    settings: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Refinement study; writes the EOC table (`table`).
    Study(Common),
    /// Solves one level (`level`) and writes a VTK file (`vtk`).
    Solve(Common),
    /// Runs the operator, constitutive and patch checks.
    Check(Common),
    /// Lists the configuration keys.
    Keys,
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    check_thread_env()?;
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    cfg.apply_args(&common.settings)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = match &cli.command {
        Command::Study(c) | Command::Solve(c) | Command::Check(c) => c,
        Command::Keys => {
            for (k, help) in ldgpflow_cli::config::KEYS {
                println!("{k:<18} {help}");
            }
            return Ok(());
        }
    };
    let cfg = load(common)?;
    if common.print_config {
        print!("{}", cfg.describe());
        return Ok(());
    }
    match cli.command {
        Command::Study(_) => {
            let report = run_study(&cfg, &mut std::io::stderr())?;
            print!("{}", Table::from_report(&report).to_csv());
            eprintln!("wrote {}", cfg.table.display());
        }
        Command::Solve(_) => println!("{}", run_solve(&cfg)?),
        Command::Check(_) => run_check(&cfg, &mut std::io::stdout())?,
        Command::Keys => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
