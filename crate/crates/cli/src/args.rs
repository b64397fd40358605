//! Command-line grammar and `key=value` overrides.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Stock exit problem: boundaries, ambiguity and volatility sweeps.
    Stock {
        /// Solve a single point at this power exponent instead of the sweeps.
        #[arg(long, allow_negative_numbers = true)]
        lambda: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        sigma: Option<f64>,
    },
    /// Divestment problem on a scenario pack.
    Divest {
        #[arg(long)]
        scenarios: PathBuf,
        /// Restrict the ambiguity sweep to one exponent.
        #[arg(long, allow_negative_numbers = true)]
        lambda: Option<f64>,
    },
    /// Brute-force minimax certification on small random instances.
    MinimaxCheck {
        #[arg(long, default_value_t = 0.01)]
        grid_step: f64,
    },
    /// Posterior diagnostics on simulated signal paths.
    FilterSim {
        #[arg(long)]
        scenarios: Option<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Stock { .. } => "stock",
            Command::Divest { .. } => "divest",
            Command::MinimaxCheck { .. } => "minimax-check",
            Command::FilterSim { .. } => "filter-sim",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args)]
struct Common {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Override a configuration value; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Parser)]
#[command(name = "ambistop", version, about = "Optimal stopping under smooth scenario ambiguity")]
struct FullCli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Parsed invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub out: PathBuf,
    pub overrides: Vec<(String, String)>,
}

/// Parses `argv` (including the program name). Help and version requests
/// come back as `Usage` errors carrying the rendered text; see
/// [`is_informational`].
pub fn parse_args<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = FullCli::try_parse_from(argv).map_err(|e| CliError::Usage(e.render().to_string()))?;
    let mut overrides = Vec::with_capacity(cli.common.set.len());
    for kv in &cli.common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override `{kv}` is not of the form key=value")))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(RunConfig { command: cli.command, seed: cli.common.seed, out: cli.common.out, overrides })
}

/// True when a clap error is really `--help` or `--version` output.
pub fn is_informational<I, T>(argv: I) -> bool
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    use clap::error::ErrorKind;
    match FullCli::try_parse_from(argv) {
        Err(e) => matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion),
        Ok(_) => false,
    }
}

/// Typed access to `--set` overrides. Every key must be consumed; leftover
/// keys are reported by [`Overrides::finish`].
#[derive(Debug, Default)]
pub struct Overrides {
    map: BTreeMap<String, String>,
}

impl Overrides {
    pub fn new(pairs: &[(String, String)]) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            if map.insert(k.clone(), v.clone()).is_some() {
                return Err(CliError::Usage(format!("override `{k}` given twice")));
            }
        }
        Ok(Self { map })
    }

    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("cannot parse override {key}={v}"))),
        }
    }

    pub fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.take(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn take_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("cannot parse list override {key}={v}"))),
        }
    }

    pub fn finish(self) -> Result<(), CliError> {
        match self.map.keys().next() {
            None => Ok(()),
            Some(k) => Err(CliError::Usage(format!("unknown override key `{k}`"))),
        }
    }
}
