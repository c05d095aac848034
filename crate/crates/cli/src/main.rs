//! `mhodge` command-line tool.
//!
//! Exit status: 0 on success, 2 when input is rejected (usage, invalid
//! domain, bad flags), 1 on internal failure. Failures print the violated
//! invariant as `<module>.<invariant>: detail` on stderr.

mod commands;
mod config;

use std::process::ExitCode;

use clap::Parser;

use config::{Cli, Command};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cli.{invariant}: {detail}")]
    Invalid { invariant: &'static str, detail: String },

    #[error(transparent)]
    Core(#[from] mhodge::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn invalid(invariant: &'static str, detail: impl Into<String>) -> Self {
        CliError::Invalid {
            invariant,
            detail: detail.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid { .. } => 2,
            CliError::Core(e) if e.is_validation() => 2,
            _ => 1,
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("MHODGE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n >= 1).ok_or_else(|| {
        CliError::invalid(
            "threads",
            format!("MHODGE_THREADS must be a positive integer, got `{raw}`"),
        )
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::invalid("threads", e.to_string()))
}

fn resolve(cli: Cli) -> Result<Command, CliError> {
    match (cli.config, cli.command) {
        (Some(path), None) => config::load(&path),
        (None, Some(cmd)) => Ok(cmd),
        (Some(_), Some(_)) => Err(CliError::invalid(
            "config",
            "--config replaces the command line; do not combine it with a subcommand",
        )),
        (None, None) => Err(CliError::invalid("command", "no subcommand given (see --help)")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; everything else is usage.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = configure_threads()
        .and_then(|_| resolve(cli))
        .and_then(|cmd| commands::run(&cmd));
    match outcome {
        Ok(summary) => {
            eprintln!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
