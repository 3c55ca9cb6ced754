//! `match`: detect arbitrage actions inside a time/volume window.

use std::path::{Path, PathBuf};

use clap::Args;
use triarb_core::matcher::{match_ledger, MatchConfig};
use triarb_core::Decimal;

use crate::config::Config;
use crate::{csvio, CliError};

#[derive(Args)]
pub struct MatchArgs {
    /// Cleaned ledger from `dedup`.
    #[arg(long, value_name = "FILE")]
    pub ledger: PathBuf,
    /// Maximum time delay between the legs, seconds.
    #[arg(long, value_name = "SECS")]
    pub dt: Option<i64>,
    /// Maximum volume difference between the legs, percent.
    #[arg(long, value_name = "PCT")]
    pub dq: Option<String>,
}

pub fn window_from(
    dt: Option<i64>,
    dq: Option<String>,
    config: &Config,
) -> Result<MatchConfig, CliError> {
    let dt = match dt {
        Some(v) => v,
        None => config
            .parse::<i64>("match.max_time_delta_secs")
            .map_err(|e| CliError::usage(format!("{e:#}")))?
            .unwrap_or(300),
    };
    let dq_raw = dq.or_else(|| config.get("match.max_volume_delta_pct").map(String::from));
    let dq = match dq_raw {
        Some(raw) => raw
            .trim()
            .parse::<Decimal>()
            .map_err(|e| CliError::usage(format!("--dq: {e}")))?,
        None => Decimal::from(10),
    };
    if dt < 0 || dq < Decimal::ZERO {
        return Err(CliError::usage("window thresholds must be non-negative"));
    }
    Ok(MatchConfig::new(dt, dq))
}

pub fn run(args: MatchArgs, config: &Config, out_dir: &Path) -> Result<(), CliError> {
    let legs = csvio::read_ledger(&args.ledger)?;
    let window = window_from(args.dt, args.dq, config)?;
    let actions = match_ledger(&legs, &window);
    csvio::write_actions(&out_dir.join("actions.csv"), &actions)?;
    println!(
        "match: {} actions at ({}s, {}%) -> {}",
        actions.len(),
        window.max_time_delta_secs,
        window.max_volume_delta_pct,
        out_dir.join("actions.csv").display()
    );
    Ok(())
}
