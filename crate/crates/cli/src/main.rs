//! `coflow`: exit status 0 on success, 1 when a verification fails, 2 on
//! bad input (including clap usage errors).

mod args;
mod commands;

use clap::Parser;

use args::{Cli, Command};
use commands::CliError;

/// `COFLOW_SEED`, when set, overrides `--seed`.
fn effective_seed(flag: u64) -> Result<u64, CliError> {
    match std::env::var("COFLOW_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("COFLOW_SEED must be an unsigned integer, got {v:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(e) => Err(CliError::Input(format!("COFLOW_SEED: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Verify(a) => {
            let seed = effective_seed(a.seed)?;
            commands::verify(&a, seed)
        }
        Command::Flow(a) => commands::flow(&a),
        Command::Stability(a) => commands::stability(&a),
        Command::SphereIndex(a) => commands::sphere_index(&a),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("coflow: {e}");
        std::process::exit(e.exit_code());
    }
}
