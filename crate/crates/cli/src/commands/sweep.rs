//! `sweep`: the action-count surface over window thresholds, or the full
//! robustness grid of regressions.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use triarb_core::econ::robustness_suite;
use triarb_core::matcher::{sweep_thresholds, MatchConfig};
use triarb_core::pricing::{FeeRegime, RateTable};
use triarb_core::Decimal;

use crate::commands::price::{load_rate_dir, read_fee_model};
use crate::config::Config;
use crate::{csvio, CliError};

#[derive(Args)]
pub struct SweepArgs {
    /// Cleaned ledger from `dedup`.
    #[arg(long, value_name = "FILE")]
    pub ledger: PathBuf,
    /// Emit only the action-count surface over the threshold grid.
    #[arg(long)]
    pub counts: bool,
    /// Comma-separated time thresholds in seconds (counts mode).
    #[arg(long, value_name = "SECS", default_value = "0,30,60,120,300,600")]
    pub dt_grid: String,
    /// Comma-separated volume thresholds in percent (counts mode).
    #[arg(long, value_name = "PCT", default_value = "0,1,5,10,20")]
    pub dq_grid: String,
    /// Rate directory (robustness mode).
    #[arg(long, value_name = "DIR")]
    pub rates: Option<PathBuf>,
    /// Fitted fee model; enables the expected-fee cells.
    #[arg(long, value_name = "FILE")]
    pub fee_model: Option<PathBuf>,
    /// Learning-filter bound in days for the filtered cells.
    #[arg(long, value_name = "DAYS", default_value_t = 14)]
    pub learning_days: i64,
}

fn parse_grid<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| CliError::usage(format!("bad {what} value {s:?}"))))
        .collect()
}

pub fn run(args: SweepArgs, _config: &Config, out_dir: &Path) -> Result<(), CliError> {
    let legs = csvio::read_ledger(&args.ledger)?;

    if args.counts {
        let dts: Vec<i64> = parse_grid(&args.dt_grid, "--dt-grid")?;
        let dqs: Vec<Decimal> = parse_grid(&args.dq_grid, "--dq-grid")?;
        let grid: Vec<MatchConfig> = dts
            .iter()
            .flat_map(|&dt| dqs.iter().map(move |&dq| MatchConfig::new(dt, dq)))
            .collect();
        let counts = sweep_thresholds(&legs, &grid);
        let mut out = String::from("# triarb-sweep-counts v1\ndt_secs,dq_pct,actions\n");
        for (cfg, n) in counts {
            let _ = writeln!(out, "{},{},{n}", cfg.max_time_delta_secs, cfg.max_volume_delta_pct);
        }
        let path = out_dir.join("sweep_counts.csv");
        csvio::write_atomic(&path, &out)?;
        println!("sweep: {} cells -> {}", dts.len() * dqs.len(), path.display());
        return Ok(());
    }

    let rates_dir = args
        .rates
        .as_ref()
        .ok_or_else(|| CliError::usage("robustness mode needs --rates (or pass --counts)"))?;
    let bars = load_rate_dir(rates_dir)?;
    let rates = RateTable::new(&bars);
    let fee_model = match &args.fee_model {
        Some(path) => Some(read_fee_model(path)?),
        None => None,
    };

    let windows = [
        MatchConfig::new(30, Decimal::from(1)),
        MatchConfig::new(300, Decimal::from(10)),
        MatchConfig::new(600, Decimal::from(20)),
    ];
    let regimes = [FeeRegime::Actual, FeeRegime::NoFees, FeeRegime::Expected];
    let learning = [false, true];
    let cells = robustness_suite(
        &legs,
        &rates,
        fee_model.as_ref(),
        &windows,
        &regimes,
        &learning,
        args.learning_days,
    );

    let mut out = String::from(
        "# triarb-robustness v1\ndt_secs,dq_pct,regime,learning_filter,term,value,std_error,n,r_squared,status\n",
    );
    for cell in &cells {
        let prefix = format!(
            "{},{},{},{}",
            cell.window.max_time_delta_secs,
            cell.window.max_volume_delta_pct,
            cell.regime.as_str(),
            if cell.learning_filter { 1 } else { 0 },
        );
        match &cell.result {
            Ok(result) => {
                for (j, name) in result.names.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "{prefix},{name},{},{},{},{},ok",
                        result.coefficients[j],
                        result.std_errors[j],
                        result.n_used,
                        result.r_squared,
                    );
                }
                let _ = writeln!(
                    out,
                    "{prefix},constant,{},,{},{},ok",
                    result.constant, result.n_used, result.r_squared
                );
            }
            Err(e) => {
                let _ = writeln!(out, "{prefix},,,,,,{e}");
            }
        }
    }
    let path = out_dir.join("robustness.csv");
    csvio::write_atomic(&path, &out)?;
    println!("sweep: {} robustness cells -> {}", cells.len(), path.display());
    Ok(())
}
