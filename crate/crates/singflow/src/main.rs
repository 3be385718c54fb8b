use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use singflow::commands::{run, Command};
use singflow::config::{tolerances_from_env, Params, RunConfig};
use singflow::CliError;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Flow,
    Phases,
    Errors,
    Spectrum,
    Perturb,
    Tune,
}

/// Counterterm flow, phase shifts and spectra for singular attractive potentials.
#[derive(Debug, Parser)]
#[command(name = "singflow", version)]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// File of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    params: Params,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(p) => Params::from_kv(&std::fs::read_to_string(p)?)?,
        None => Params::default(),
    };
    let params = file.overridden_by(cli.params);
    let cfg = RunConfig::from_params(params, tolerances_from_env(std::env::vars())?)?;
    let cmd = match cli.command {
        Cmd::Flow => Command::Flow,
        Cmd::Phases => Command::Phases,
        Cmd::Errors => Command::Errors,
        Cmd::Spectrum => Command::Spectrum,
        Cmd::Perturb => Command::Perturb,
        Cmd::Tune => Command::Tune,
    };
    let text = run(cmd, &cfg)?;
    match &cfg.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
