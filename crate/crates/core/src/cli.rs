//! Command-line runner: one experiment per invocation, one CSV per run.

use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use thiserror::Error;

use crate::experiments::{self, ExperimentError};
use crate::report::{self, SchemaError, Table};
use crate::scenario::{ConfigError, ScenarioConfig};

pub const THREADS_ENV: &str = "BACKSIM_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Experiment {
    Fig3a,
    Fig3b,
    TradeoffBeta,
    TradeoffDuty,
    Thss,
    InterferenceCount,
    Dyadic,
}

#[derive(Debug, Clone, PartialEq, Eq, Parser)]
#[command(name = "backsim", version, about = "Backscatter network simulator")]
pub struct ExperimentSpec {
    #[arg(long = "experiment", value_enum)]
    pub name: Experiment,
    /// Flat `key = value` config; built-in defaults when omitted.
    #[arg(long = "config")]
    pub config_path: Option<PathBuf>,
    #[arg(long = "out")]
    pub out_path: PathBuf,
    #[arg(long = "seed")]
    pub seed_override: Option<u64>,
    /// Topologies for fig3a/fig3b, trials per point for thss and dyadic.
    #[arg(long = "trials")]
    pub trials_override: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path}: {source}")]
    Config { path: PathBuf, source: ConfigError },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("output {path} failed validation: {source}")]
    Schema { path: PathBuf, source: SchemaError },
    #[error("invalid {THREADS_ENV}: {0}")]
    Threads(String),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}

pub fn parse_args<I, T>(argv: I) -> Result<ExperimentSpec, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    ExperimentSpec::try_parse_from(argv)
}

pub fn load_config(spec: &ExperimentSpec) -> Result<ScenarioConfig, CliError> {
    let mut config = match &spec.config_path {
        None => ScenarioConfig::default(),
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
                path: path.clone(),
                source,
            })?;
            ScenarioConfig::from_kv_str(&text).map_err(|source| CliError::Config {
                path: path.clone(),
                source,
            })?
        }
    };
    if let Some(seed) = spec.seed_override {
        config.seed = seed;
    }
    if let Some(n) = spec.trials_override {
        config.num_topologies = n;
    }
    Ok(config)
}

pub fn build_table(spec: &ExperimentSpec, config: &ScenarioConfig) -> Result<Table, CliError> {
    let table = match spec.name {
        Experiment::Fig3a | Experiment::Fig3b => {
            experiments::comparison(config, config.num_topologies)?
        }
        Experiment::TradeoffBeta => {
            experiments::tradeoff_beta(config, &experiments::default_beta_grid())?
        }
        Experiment::TradeoffDuty => {
            experiments::tradeoff_duty(config, &experiments::default_duty_grid())?
        }
        Experiment::Thss => experiments::thss(
            config.seed,
            spec.trials_override.unwrap_or(experiments::THSS_TRIALS),
        )?,
        Experiment::InterferenceCount => experiments::interference_count(),
        Experiment::Dyadic => experiments::dyadic(
            config.seed,
            spec.trials_override.unwrap_or(1_000_000),
        )?,
    };
    Ok(table)
}

fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Threads(v)),
        },
    }
}

/// Runs the experiment, writes and re-validates the CSV, and returns the
/// summary line.
pub fn run(spec: &ExperimentSpec) -> Result<String, CliError> {
    let start = Instant::now();
    let config = load_config(spec)?;
    let table = match thread_cap()? {
        None => build_table(spec, &config)?,
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Threads(e.to_string()))?;
            pool.install(|| build_table(spec, &config))?
        }
    };
    let csv = table.to_csv_string();
    let path = &spec.out_path;
    fs::write(path, &csv).map_err(|source| CliError::Write {
        path: path.clone(),
        source,
    })?;
    let written = fs::read_to_string(path).map_err(|source| CliError::Write {
        path: path.clone(),
        source,
    })?;
    let rows = report::validate_csv(&written, &table.header).map_err(|source| CliError::Schema {
        path: path.clone(),
        source,
    })?;
    Ok(format!(
        "{:?}: {rows} rows in {:.2}s -> {}",
        spec.name,
        start.elapsed().as_secs_f64(),
        path.display()
    ))
}
