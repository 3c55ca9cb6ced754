//! Pipeline CLI: each stage reads the previous stage's canonical CSV and
//! writes its own atomically, so stages are independently re-runnable and
//! re-running with unchanged inputs is byte-identical.

mod commands;
mod config;
mod csvio;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Config;

/// A classified failure: 1 usage, 2 input format, 3 numerical.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    pub fn input(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::input(format!("{e:#}"))
    }
}

#[derive(Parser)]
#[command(
    name = "triarb",
    version,
    about = "Mine exchange trade ledgers for triangular arbitrage",
    long_about = "Stage-file pipeline: ingest -> dedup -> match -> price -> fees/profile -> \
                  regress/sweep/report. Every stage reads the previous stage's canonical CSV \
                  and writes its outputs atomically into the output directory."
)]
struct Cli {
    /// Flat key=value configuration file; explicit flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory (falls back to config `out.dir`, then $TRIARB_OUT).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw monthly trade logs into the canonical ledger.
    Ingest(commands::ingest::IngestArgs),
    /// Deduplicate, sanity-filter, restrict, merge, aggregate, anonymize.
    Dedup(commands::dedup::DedupArgs),
    /// Detect arbitrage actions within a time/volume window.
    Match(commands::match_cmd::MatchArgs),
    /// Price actions against hourly official rates under all fee regimes.
    Price(commands::price::PriceArgs),
    /// Fit the expected-fee model and the zero-fee logit.
    Fees(commands::fees::FeesArgs),
    /// Build per-user profiles, metaorders, and ability scores.
    Profile(commands::profile::ProfileArgs),
    /// Estimate the ability and rate-interaction regressions.
    Regress(commands::regress::RegressArgs),
    /// Threshold sweeps: action-count surface or the robustness grid.
    Sweep(commands::sweep::SweepArgs),
    /// Generate a synthetic ledger with planted ground truth.
    Synth(commands::synth::SynthArgs),
    /// Assemble the summary report tables from stage outputs.
    Report(commands::report_cmd::ReportArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => Config::load(path).map_err(|e| CliError::usage(format!("{e:#}")))?,
        None => Config::default(),
    };
    let out_dir = config::resolve_out_dir(cli.out.clone(), &config);

    match cli.command {
        Command::Ingest(args) => commands::ingest::run(args, &config, &out_dir),
        Command::Dedup(args) => commands::dedup::run(args, &config, &out_dir),
        Command::Match(args) => commands::match_cmd::run(args, &config, &out_dir),
        Command::Price(args) => commands::price::run(args, &config, &out_dir),
        Command::Fees(args) => commands::fees::run(args, &config, &out_dir),
        Command::Profile(args) => commands::profile::run(args, &config, &out_dir),
        Command::Regress(args) => commands::regress::run(args, &config, &out_dir),
        Command::Sweep(args) => commands::sweep::run(args, &config, &out_dir),
        Command::Synth(args) => commands::synth::run(args, &config, &out_dir),
        Command::Report(args) => commands::report_cmd::run(args, &config, &out_dir),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            eprintln!("triarb-error\tcode=1\tusage");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // One machine-readable line on stderr.
            eprintln!("triarb-error\tcode={}\t{}", e.code, e.message.replace('\n', " "));
            ExitCode::from(e.code)
        }
    }
}
