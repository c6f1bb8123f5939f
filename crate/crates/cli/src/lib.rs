//! Command-line front end for the `entswap` simulator.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 usage error,
//! 3 session aborted, 4 oracle mismatch.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

pub mod commands;
pub mod config;

pub use config::{parse_config, CliConfig, CommandKind, Format};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Clap(clap::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("writing output: {0}")]
    Stdout(std::io::Error),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Clap(e) => e.exit_code(),
            CliError::Io { .. } | CliError::Stdout(_) | CliError::Internal(_) => 1,
        }
    }
}

/// Runs a parsed configuration, writing to `stdout`.
pub fn execute(cfg: &CliConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    match cfg.command {
        CommandKind::Run => commands::cmd_run(cfg, stdout),
        CommandKind::Sweep => commands::cmd_sweep(cfg, stdout),
        CommandKind::OracleCheck => commands::cmd_oracle_check(cfg, stdout),
        CommandKind::Attack => commands::cmd_attack(cfg, stdout),
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let result = parse_config(argv, None).and_then(|cfg| {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        let code = execute(&cfg, &mut lock)?;
        lock.flush().map_err(CliError::Stdout)?;
        Ok(code)
    });
    match result {
        Ok(code) => code,
        Err(CliError::Clap(e)) => {
            let _ = e.print();
            e.exit_code()
        }
        Err(e) => {
            eprintln!("entswap: {e}");
            e.exit_code()
        }
    }
}
