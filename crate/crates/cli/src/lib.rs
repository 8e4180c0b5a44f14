//! Experiment runner behind the `dephaskit` binary.
//!
//! Subcommands write plain data files (CSV and JSON) into the output
//! directory; plotting is left to external tools.

pub mod args;
pub mod classify;
pub mod config;
pub mod error;
pub mod fit;
pub mod output;
pub mod runs;
pub mod summary;
pub mod sweep;
pub mod trajectory;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::args::{Cli, Command};
use crate::config::{RunConfig, OUT_DIR_ENV};
use crate::error::{CliError, CliResult};

/// Runs a parsed command and returns the files it wrote.
pub fn execute(cli: &Cli, env_out: Option<PathBuf>) -> CliResult<Vec<PathBuf>> {
    let cfg = RunConfig::resolve(&cli.overrides, env_out)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cfg.jobs {
        builder = builder.num_threads(jobs);
    }
    let pool = builder.build().map_err(|e| {
        CliError::Usage(format!(
            "cannot start {} worker threads: {e}",
            cfg.jobs.unwrap_or(0)
        ))
    })?;
    pool.install(|| match &cli.command {
        Command::Classify => classify::run(&cfg),
        Command::SweepSigma => sweep::run(&cfg),
        Command::Fit => fit::run(&cfg),
        Command::Trajectory { quantities } => trajectory::run(&cfg, quantities),
    })
}

/// Full process entry point: argument parsing, execution and exit status.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let env_out = std::env::var_os(OUT_DIR_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from);
    match execute(&cli, env_out) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
