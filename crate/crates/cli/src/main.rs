//! `indet`: batch front end for indetermination couplings.

mod commands;
mod config;
mod error;
mod inputs;
mod output;

use std::process::ExitCode;

use clap::Parser;

use crate::commands::Command;
use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "indet", version, about = "Indetermination couplings, copulas and tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    config: RunConfig,
}

fn resolve(cli: Cli) -> Result<(Command, RunConfig), CliError> {
    let mut cfg = cli.config;
    if let Some(path) = cfg.config.clone() {
        cfg = cfg.overlay(RunConfig::load(&path)?);
    }
    if let Some(name) = &cfg.command {
        if name != cli.command.name() {
            return Err(CliError::Validation(format!(
                "config file is for `{name}`, not `{}`",
                cli.command.name()
            )));
        }
    }
    Ok((cli.command, cfg))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, cfg) = resolve(cli)?;
    if let Some(workers) = cfg.workers {
        if workers == 0 {
            return Err(CliError::Validation("workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let quad = cfg.quadrature()?;
    let record = command.run(&cfg, &quad)?;
    output::emit(&cfg, &output::render(command.name(), &cfg, &quad, record))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("indet: {e}");
            e.exit_code()
        }
    }
}
