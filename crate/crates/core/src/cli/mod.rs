//! Command-line front end.
//!
//! Every subcommand builds an [`ExperimentConfig`] and hands it to [`run`], so
//! `run --config file.json` and the flag form behave identically. Exit status
//! is 0 on success, 1 when a check fails or a computation breaks down, and 2
//! for configuration or usage errors.

mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

pub use config::ExperimentConfig;
use config::*;

use crate::error::{Error, Result};

/// Result of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub passed: bool,
    pub outputs: Vec<PathBuf>,
    pub summary: Value,
    pub stdout: String,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Execute a config, writing its artifacts and `manifest.json` to the output
/// directory.
pub fn run(config: &ExperimentConfig) -> Result<Outcome> {
    commands::execute(config)
}

/// Exit status for an error: numerical breakdowns and failed preconditions of a
/// check count as failures, everything else as usage errors.
pub fn error_status(e: &Error) -> i32 {
    match e {
        Error::SolverDivergence { .. }
        | Error::NonFiniteState(_)
        | Error::SignalTooWeak(_)
        | Error::NonFinite(_)
        | Error::MassMismatch { .. }
        | Error::NotSeparable { .. } => EXIT_FAILED,
        _ => EXIT_USAGE,
    }
}

pub fn exit_status(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) if o.passed => EXIT_OK,
        Ok(_) => EXIT_FAILED,
        Err(e) => error_status(e),
    }
}

#[derive(Debug, Parser)]
#[command(name = "boostfield", version, about = "Boosted harmonic fields: kinematics, spectra, equation checks and finite-difference evolution")]
pub struct Cli {
    /// Directory for reports, tables, snapshots and manifest.json.
    #[arg(long, global = true, env = "BOOSTFIELD_OUT")]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SpecArg {
    /// Field document (JSON) with boost, components and optional mass block.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lorentz-transform one event along z and print x',y',z',tau'.
    Boost(BoostParams),
    /// Evaluate the boosted field and the frame scalar at events; writes field.csv.
    Field {
        #[command(flatten)]
        spec: SpecArg,
        #[command(flatten)]
        params: FieldParams,
    },
    /// Time-average harmonic amplitudes of a sampled signal; writes spectrum.csv
    /// (omega, re_q, im_q, abs_q, window_T).
    Spectrum {
        #[command(flatten)]
        spec: SpecArg,
        #[command(flatten)]
        params: SpectrumParams,
    },
    /// Certify derivative formulas and envelope equations at seeded events;
    /// writes the report and a manifest, exit 1 above tolerance.
    Verify {
        #[command(flatten)]
        spec: SpecArg,
        /// Seed for event sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        params: VerifyParams,
    },
    /// Finite-difference evolution on a periodic grid; writes trajectory.csv,
    /// snapshots, final state and optionally dispersion.csv.
    Evolve {
        #[command(flatten)]
        spec: SpecArg,
        /// Output directory for this run.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        params: EvolveParams,
    },
    /// Residual of the gamma -> 1 envelope equation across speeds; writes limit_scan.csv.
    LimitScan {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        params: LimitScanParams,
    },
    /// Execute an experiment config document.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

impl Cli {
    /// The config this invocation describes.
    pub fn into_config(self) -> Result<ExperimentConfig> {
        let explicit_out = self.out_dir;
        let out_dir = explicit_out.clone().unwrap_or_else(|| PathBuf::from("."));
        let with = |params: CommandParams, spec: SpecArg, seed: u64, out: PathBuf| ExperimentConfig {
            spec_file: spec.spec,
            output_dir: out,
            seed,
            params,
        };
        Ok(match self.command {
            Command::Boost(p) => with(CommandParams::Boost(p), SpecArg { spec: None }, 0, out_dir),
            Command::Field { spec, params } => with(CommandParams::Field(params), spec, 0, out_dir),
            Command::Spectrum { spec, params } => with(CommandParams::Spectrum(params), spec, 0, out_dir),
            Command::Verify { spec, seed, mut params } => {
                // a report path with a directory moves the whole run there
                let (dir, report) = match (params.report.parent(), params.report.file_name()) {
                    (Some(parent), Some(name)) if !parent.as_os_str().is_empty() => (out_dir.join(parent), PathBuf::from(name)),
                    _ => (out_dir, params.report.clone()),
                };
                params.report = report;
                with(CommandParams::Verify(params), spec, seed, dir)
            }
            Command::Evolve { spec, out, params } => with(CommandParams::Evolve(params), spec, 0, out.unwrap_or(out_dir)),
            Command::LimitScan { spec, seed, params } => with(CommandParams::LimitScan(params), spec, seed, out_dir),
            Command::Run { config } => {
                let mut cfg = ExperimentConfig::load(&config)?;
                if let Some(dir) = explicit_out {
                    cfg.output_dir = dir;
                }
                cfg
            }
        })
    }
}
