//! Command-line and config-file parsing.
//!
//! A config file is flat TOML whose keys are the long flag names without
//! the leading dashes:
//!
//! ```toml
//! groups = 8
//! check-fraction = 0.25
//! adversary = "type2"
//! trials = 10000
//! seed = 7
//! pair-states = "all_phi_plus"
//! format = "both"
//! out = "results"
//! ```
//!
//! Flags override file values; `ENTSWAP_SEED` is used only when neither
//! sets a seed.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use entswap::adversary::AdversaryKind;
use entswap::bell::BellIndex;
use entswap::protocol::{PairStatePolicy, SessionConfig, DEFAULT_CHECK_FRACTION};
use serde::Deserialize;

use crate::CliError;

pub const DEFAULT_GROUPS: usize = 16;
pub const DEFAULT_TRIALS: u64 = 1000;
pub const SEED_ENV: &str = "ENTSWAP_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Run,
    Sweep,
    OracleCheck,
    Attack,
}

#[derive(Debug, Parser)]
#[command(
    name = "entswap",
    version,
    about = "Entanglement-swapping key distribution simulator",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one protocol session and write its report and transcript.
    Run(Flags),
    /// Monte Carlo over every (adversary, checked groups) grid point.
    Sweep(Flags),
    /// Exhaustively check the swapping rule against the statevector.
    OracleCheck(Flags),
    /// Monte Carlo of one adversary at one configuration.
    Attack(Flags),
}

#[derive(Debug, Default, Args)]
struct Flags {
    /// Number of groups (two pairs each).
    #[arg(long)]
    groups: Option<usize>,
    /// Fraction of groups Bob publishes for checking.
    #[arg(long)]
    check_fraction: Option<f64>,
    /// none | type1 | type2 | type3
    #[arg(long)]
    adversary: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// all_phi_plus, random, random:<seed>, or a comma list such as phi+,psi+
    #[arg(long)]
    pair_states: Option<String>,
    /// Output file (run, attack) or directory (sweep, oracle-check).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Flat TOML file with the same keys as the long flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub groups: Option<usize>,
    pub check_fraction: Option<f64>,
    pub adversary: Option<String>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub pair_states: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config file: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub command: CommandKind,
    pub session: SessionConfig,
    pub adversary: AdversaryKind,
    /// Whether an adversary was named (sweep covers all four otherwise).
    pub adversary_explicit: bool,
    pub trials: u64,
    pub output_path: Option<PathBuf>,
    pub format: Format,
}

fn parse_pair_states(text: &str, seed: u64) -> Result<PairStatePolicy, CliError> {
    let text = text.trim();
    match text {
        "all_phi_plus" => return Ok(PairStatePolicy::AllPhiPlus),
        "random" => return Ok(PairStatePolicy::RandomKnown(seed)),
        _ => {}
    }
    if let Some(s) = text.strip_prefix("random:") {
        let s = s
            .parse()
            .map_err(|_| CliError::Usage(format!("bad pair-states seed {s:?}")))?;
        return Ok(PairStatePolicy::RandomKnown(s));
    }
    let list = text
        .split(',')
        .map(BellIndex::from_str)
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(PairStatePolicy::FixedList(list))
}

/// Parses `argv` (including the program name). The config file named by
/// `--config` is read from disk unless `config_text` is supplied.
pub fn parse_config<I, T>(argv: I, config_text: Option<&str>) -> Result<CliConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let env_seed = std::env::var(SEED_ENV).ok();
    parse_with_env(argv, config_text, env_seed.as_deref())
}

fn parse_with_env<I, T>(
    argv: I,
    config_text: Option<&str>,
    env_seed: Option<&str>,
) -> Result<CliConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(CliError::Clap)?;
    let (command, flags) = match cli.command {
        Command::Run(f) => (CommandKind::Run, f),
        Command::Sweep(f) => (CommandKind::Sweep, f),
        Command::OracleCheck(f) => (CommandKind::OracleCheck, f),
        Command::Attack(f) => (CommandKind::Attack, f),
    };
    let file = match (config_text, &flags.config) {
        (Some(text), _) => FileConfig::parse(text)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
                path: path.clone(),
                source: e,
            })?;
            FileConfig::parse(&text)?
        }
        (None, None) => FileConfig::default(),
    };
    resolve(command, flags, file, env_seed)
}

fn resolve(
    command: CommandKind,
    flags: Flags,
    file: FileConfig,
    env_seed: Option<&str>,
) -> Result<CliConfig, CliError> {
    let seed = match flags.seed.or(file.seed) {
        Some(s) => s,
        None => match env_seed {
            Some(s) => s
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{SEED_ENV}={s:?} is not an integer")))?,
            None => 0,
        },
    };
    let adversary_name = flags.adversary.or(file.adversary);
    let adversary_explicit = adversary_name.is_some();
    let adversary = match adversary_name {
        Some(name) => name.parse().map_err(CliError::Usage)?,
        None => AdversaryKind::NoEve,
    };
    let n_groups = flags.groups.or(file.groups).unwrap_or(DEFAULT_GROUPS);
    let pair_state_policy = match flags.pair_states.or(file.pair_states) {
        Some(text) => parse_pair_states(&text, seed)?,
        None => PairStatePolicy::AllPhiPlus,
    };
    let session = SessionConfig {
        n_groups,
        pair_state_policy,
        check_fraction: flags
            .check_fraction
            .or(file.check_fraction)
            .unwrap_or(DEFAULT_CHECK_FRACTION),
        seed,
    };
    session
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let trials = flags.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    Ok(CliConfig {
        command,
        session,
        adversary,
        adversary_explicit,
        trials,
        output_path: flags.out.or(file.out),
        format: flags.format.or(file.format).unwrap_or(Format::Json),
    })
}
