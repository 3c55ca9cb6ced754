//! `price`: official rates, implied rates, spreads, and dollar values.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::Args;
use triarb_core::currency::{Currency, CurrencyPair};
use triarb_core::fees::{predict_expected_fee, rolling_volumes, FittedModel};
use triarb_core::ledger::{parse_rate_file, RateBar};
use triarb_core::pricing::{price_action, ExpectedFees, RateTable};

use crate::config::Config;
use crate::{csvio, CliError};

#[derive(Args)]
pub struct PriceArgs {
    /// Actions from `match`.
    #[arg(long, value_name = "FILE")]
    pub actions: PathBuf,
    /// Directory of hourly rate files named like EURUSD.csv.
    #[arg(long, value_name = "DIR")]
    pub rates: PathBuf,
    /// Fitted expected-fee model from `fees`; enables the expected-fee
    /// spread. Requires --ledger for trailing volumes.
    #[arg(long, value_name = "FILE")]
    pub fee_model: Option<PathBuf>,
    /// Cleaned ledger, needed to compute trailing volumes for the
    /// expected-fee predictions.
    #[arg(long, value_name = "FILE")]
    pub ledger: Option<PathBuf>,
    /// Compatibility switch: compute the fee-inclusive implied rate with the
    /// published sign layout instead of the economically oriented one.
    #[arg(long)]
    pub printed_fee_layout: bool,
}

/// Load every `<BASE><QUOTE>.csv` under the directory.
pub fn load_rate_dir(dir: &Path) -> Result<Vec<RateBar>, CliError> {
    let mut bars = Vec::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for path in entries {
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        if !name.ends_with(".csv") || name.len() != 10 {
            continue;
        }
        let base: Currency = name[0..3]
            .parse()
            .map_err(|_| CliError::input(format!("{name}: unknown base currency")))?;
        let quote: Currency = name[3..6]
            .parse()
            .map_err(|_| CliError::input(format!("{name}: unknown quote currency")))?;
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let parsed = parse_rate_file(&text, CurrencyPair::new(base, quote))
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        bars.extend(parsed);
    }
    if bars.is_empty() {
        return Err(CliError::input(format!("{}: no rate files found", dir.display())));
    }
    Ok(bars)
}

/// Parse a fitted-model text file written by `fees`.
pub fn read_fee_model(path: &Path) -> Result<FittedModel, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut labels: Vec<&'static str> = Vec::new();
    let mut coefficients = Vec::new();
    let mut std_errors = Vec::new();
    let mut r_squared = 0.0;
    let mut n = 0;
    let mut iterations = 1;
    let mut seen_schema = false;
    for line in text.lines() {
        let line = line.trim();
        if line == csvio::FEE_MODEL_SCHEMA {
            seen_schema = true;
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("coef") => {
                let label = parts
                    .next()
                    .ok_or_else(|| CliError::input(format!("{}: bad coef line", path.display())))?;
                // The model is consumed through label lookup; intern the
                // known labels so the core type's static labels still fit.
                let known: &[&'static str] = &[
                    "intercept",
                    "log_vol",
                    "vol_small",
                    "vol_big",
                    "log_vol*vol_small",
                    "log_vol*vol_big",
                    "era_flat_high",
                    "era_flat_low",
                    "special_day",
                    "bitcoins",
                    "date",
                    "anomalous_days",
                    "early_adopters",
                    "anomalous_users",
                    "matchers",
                    "markus",
                    "willy",
                ];
                let interned = known
                    .iter()
                    .find(|k| **k == label)
                    .ok_or_else(|| CliError::input(format!("unknown coefficient {label:?}")))?;
                labels.push(interned);
                let value: f64 = parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| CliError::input("bad coefficient value"))?;
                coefficients.push(value);
                std_errors.push(parts.next().and_then(|v| v.parse().ok()).unwrap_or(0.0));
            }
            Some("r_squared") => {
                r_squared = parts.next().and_then(|v| v.parse().ok()).unwrap_or(0.0);
            }
            Some("n") => {
                n = parts.next().and_then(|v| v.parse().ok()).unwrap_or(0);
            }
            Some("iterations") => {
                iterations = parts.next().and_then(|v| v.parse().ok()).unwrap_or(1);
            }
            _ => {}
        }
    }
    if !seen_schema {
        return Err(CliError::input(format!(
            "{}: not a fee-model file (missing {})",
            path.display(),
            csvio::FEE_MODEL_SCHEMA
        )));
    }
    Ok(FittedModel {
        labels,
        coefficients,
        std_errors,
        r_squared,
        n_observations: n,
        iterations,
    })
}

pub fn run(args: PriceArgs, _config: &Config, out_dir: &Path) -> Result<(), CliError> {
    let actions = csvio::read_actions(&args.actions)?;
    let bars = load_rate_dir(&args.rates)?;
    let rates = RateTable::new(&bars);

    // Expected-fee predictions need each leg's trailing volume, looked up
    // in the cleaned ledger by trade id.
    let expected_ctx = match (&args.fee_model, &args.ledger) {
        (Some(model_path), Some(ledger_path)) => {
            let model = read_fee_model(model_path)?;
            let legs = csvio::read_ledger(ledger_path)?;
            let volumes = rolling_volumes(&legs);
            let by_trade: HashMap<String, f64> = legs
                .iter()
                .zip(volumes.iter())
                .map(|(l, v)| (l.trade_id.clone(), triarb_core::decimal_to_f64(*v)))
                .collect();
            Some((model, by_trade))
        }
        (Some(_), None) => {
            return Err(CliError::usage("--fee-model requires --ledger for trailing volumes"))
        }
        _ => None,
    };

    let mut priced = Vec::with_capacity(actions.len());
    let mut excluded = 0usize;
    for action in &actions {
        let expected = expected_ctx.as_ref().map(|(model, volumes)| {
            let vol = |tid: &str| volumes.get(tid).copied().unwrap_or(0.0);
            ExpectedFees {
                buy_fraction: predict_expected_fee(
                    vol(&action.buy.trade_id),
                    action.buy.timestamp,
                    model,
                ) / 100.0,
                sell_fraction: predict_expected_fee(
                    vol(&action.sell.trade_id),
                    action.sell.timestamp,
                    model,
                ) / 100.0,
            }
        });
        let mut p = price_action(action, &rates, expected)
            .map_err(|e| CliError::numeric(format!("pricing {}: {e}", action.buy.trade_id)))?;
        if args.printed_fee_layout {
            let implied = triarb_core::pricing::implied_rate_printed_variant(action)
                .map_err(|e| CliError::numeric(format!("pricing {}: {e}", action.buy.trade_id)))?;
            p.spread_actual_pct = p
                .official_rate
                .map(|o| triarb_core::pricing::spread_pct(implied, o));
        }
        excluded += p.excluded_missing_rate as usize;
        priced.push(p);
    }

    csvio::write_priced(&out_dir.join("priced.csv"), &priced)?;
    println!(
        "price: {} actions priced, {} excluded for missing rates -> {}",
        priced.len(),
        excluded,
        out_dir.join("priced.csv").display()
    );
    Ok(())
}
