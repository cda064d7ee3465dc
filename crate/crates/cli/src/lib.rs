//! Command-line front end: configuration, county loading and the
//! `snf` / `privatize` / `replicates` / `couple` / `psrf` commands.

pub mod args;
pub mod commands;
pub mod config;
pub mod county;
pub mod error;

pub use args::{Cli, Command};
pub use error::CliError;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "LATTICE_DP_THREADS";

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Snf { matrix, out } => commands::run_snf(&matrix, out.as_deref()),
        Command::Privatize(o) => commands::run_privatize(&o.into_config()?),
        Command::Replicates(o) => commands::run_replicates(&o.into_config()?),
        Command::Couple(o) => commands::run_couple(&o.into_config()?),
        Command::Psrf(o) => commands::run_psrf(&o.into_config()?),
    }
}

/// Applies the thread cap from the environment, if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}
