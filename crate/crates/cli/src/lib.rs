//! Library side of the `pdcsim` binary: configuration, subcommands and
//! artifact output.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use pdc_core::{Error, Result};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "PDC_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "pdcsim",
    version,
    about = "Simulate high-gain PDC in a chirped poled crystal"
)]
pub struct Cli {
    /// TOML run configuration; the built-in reference config when omitted.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,

    /// Override one config key, e.g. `--set solver.coupling.nu0=1.0`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, short, global = true)]
    pub workers: Option<usize>,

    /// Output directory (falls back to `output.directory`, then
    /// $PDC_OUTPUT_DIR, then ./out).
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grating vector K(z) and phase φ(z) along the crystal.
    Design,
    /// Photons per mode |B(Ω)|² over the detuning grid.
    Spectrum {
        /// Also dump A(z), B(z) for the mode at this detuning (THz).
        #[arg(long, value_name = "THZ")]
        trajectory: Option<f64>,
    },
    /// Band-integrated flux against pump power, with both growth-law fits.
    GainScan,
    /// Signal × idler photon-number covariance of a pulse ensemble.
    Covariance,
    /// Sum-frequency signal against signal–idler delay.
    Sfg,
    /// Fit both growth laws to an external (power_mW, flux) CSV.
    Fit {
        #[arg(long, short)]
        input: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Design => "design",
            Command::Spectrum { .. } => "spectrum",
            Command::GainScan => "gain_scan",
            Command::Covariance => "covariance",
            Command::Sfg => "sfg",
            Command::Fit { .. } => "fit",
        }
    }
}

pub fn output_dir(cli_out: Option<&Path>, config: &config::RunConfig) -> PathBuf {
    cli_out
        .map(Path::to_path_buf)
        .or_else(|| config.output.directory.clone())
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Runs one subcommand and returns its summary line.
pub fn run(cli: &Cli) -> Result<String> {
    let config = config::RunConfig::load(cli.config.as_deref(), &cli.overrides)?;
    let outcome = match &cli.command {
        Command::Design => commands::design(&config)?,
        Command::Spectrum { trajectory } => commands::spectrum_cmd(&config, *trajectory)?,
        Command::GainScan => commands::gain_scan(&config)?,
        Command::Covariance => commands::covariance_cmd(&config)?,
        Command::Sfg => commands::sfg_cmd(&config)?,
        Command::Fit { input } => commands::fit_cmd(&config, input)?,
    };
    let dir = output_dir(cli.out.as_deref(), &config);
    output::write_artifacts(
        &dir,
        cli.command.name(),
        &outcome.tables,
        &config,
        outcome.results,
    )?;
    let mut pairs = vec![("command", cli.command.name().to_string())];
    pairs.extend(outcome.summary);
    pairs.push(("out", dir.display().to_string()));
    Ok(output::summary_line(&pairs))
}

/// Process exit status for an error: 2 for bad input, 3 for numerical
/// failures.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        2
    } else {
        3
    }
}
