//! `gpdcm` command-line tool.
//!
//! Exit codes: 0 success, 2 usage or invalid input, 3 numerical or chain
//! initialization failure, 4 I/O.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

mod args;
mod commands;
mod manifest;

use args::*;

#[derive(Parser)]
#[command(name = "gpdcm", version, about = "Combine two datasets observed on disjoint units and impute the missing outcomes")]
struct Cli {
    /// TOML file with one table per command (`[fit]`, `[benchmark]`, ...).
    /// Flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a complete single-source dataset with its latent truth.
    Simulate(SimulateArgs),
    /// Hide one outcome block per unit to create two-source data.
    Split(SplitArgs),
    /// Fit a model (or run matching) and write imputations and traces.
    Fit(FitArgs),
    /// Fill a two-source CSV with the imputations of a fit.
    Impute(ImputeArgs),
    /// Choose the latent dimension by CAIC.
    SelectD(SelectDArgs),
    /// Simulation study: MSE ratios against matching over many datasets.
    Benchmark(BenchmarkArgs),
}

/// Bad flags or flag combinations.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Usage(pub String);

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

pub fn io_error(path: &Path, source: std::io::Error) -> anyhow::Error {
    gpdcm::Error::Io {
        path: path.to_path_buf(),
        source,
    }
    .into()
}

fn exit_code(e: &anyhow::Error) -> u8 {
    use gpdcm::Error as E;
    if e.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    if let Some(err) = e.downcast_ref::<gpdcm::Error>() {
        return match err {
            E::Io { .. } | E::Csv(_) => 4,
            E::Numerical(_) | E::Init(_) | E::DegeneratePattern { .. } | E::DegenerateBaseline | E::PartialSelection { .. } => 3,
            E::Domain(_) | E::Shape(_) | E::Config(_) | E::Parse { .. } | E::Empty(_) => 2,
        };
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return 4;
    }
    2
}

/// Read the `[section]` table of a config file. Keys that do not name a flag
/// are rejected.
fn section<T: DeserializeOwned + Serialize + Default>(path: Option<&Path>, name: &str) -> anyhow::Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let Some(raw) = table.get(name) else { return Ok(T::default()) };
    let raw = raw
        .as_table()
        .ok_or_else(|| usage(format!("{}: `{name}` must be a table", path.display())))?;
    let parsed: T = raw
        .clone()
        .try_into()
        .map_err(|e| usage(format!("{}: [{name}] {e}", path.display())))?;
    // every key that was understood comes back out of the round trip
    let known = toml::Table::try_from(&parsed)?;
    if let Some(k) = raw.keys().find(|k| !known.contains_key(*k)) {
        return Err(usage(format!("{}: unknown key `{k}` in [{name}]", path.display())));
    }
    Ok(parsed)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::Simulate(mut a) => {
            a.layer(section(cfg, "simulate")?);
            commands::simulate(a)
        }
        Command::Split(mut a) => {
            a.layer(section(cfg, "split")?);
            commands::split(a)
        }
        Command::Fit(mut a) => {
            a.layer(section(cfg, "fit")?);
            commands::fit(a)
        }
        Command::Impute(mut a) => {
            a.layer(section(cfg, "impute")?);
            commands::impute(a)
        }
        Command::SelectD(mut a) => {
            a.layer(section(cfg, "select-d")?);
            commands::select_d(a)
        }
        Command::Benchmark(mut a) => {
            a.layer(section(cfg, "benchmark")?);
            commands::benchmark(a)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
