//! `synth`: emit a synthetic ledger in the raw column layout, its public
//! counterpart, hourly rates, and the planted ground truth.

use std::fmt::Write as _;
use std::path::Path;

use clap::Args;
use triarb_core::currency::Currency;
use triarb_core::ledger::FormatFamily;
use triarb_core::synth::{
    gen_ledger, gen_rates, render_leaked_csv, render_public_csv, render_rate_csv, SynthConfig,
};
use triarb_core::time::Timestamp;

use crate::config::Config;
use crate::{csvio, CliError};

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of noise trades.
    #[arg(long, default_value_t = 1000)]
    pub noise: usize,
    /// Number of planted arbitrage actions.
    #[arg(long, default_value_t = 50)]
    pub planted: usize,
    /// Share of trades duplicated verbatim.
    #[arg(long, default_value_t = 0.0)]
    pub dup_rate: f64,
    /// Give duplicates fresh trade ids (value-keyed methods detect them).
    #[arg(long)]
    pub dup_fresh_ids: bool,
    /// Share of noise trades transcribed through the intermediary schemes.
    #[arg(long, default_value_t = 0.0)]
    pub mc_share: f64,
    /// Planted metaorder runs (five actions each, one user and market).
    #[arg(long, default_value_t = 0)]
    pub meta_runs: usize,
    /// Comma-separated currency set.
    #[arg(long, default_value = "USD,EUR,GBP")]
    pub currencies: String,
    #[arg(long, default_value = "2012-03-01")]
    pub start: String,
    #[arg(long, default_value = "2012-06-01")]
    pub end: String,
    /// Hourly log-volatility of the generated official rates.
    #[arg(long, default_value_t = 0.002)]
    pub rate_volatility: f64,
    /// Format family for the raw layout (must cover the start month).
    #[arg(long)]
    pub family: Option<FormatFamily>,
}

pub fn run(args: SynthArgs, _config: &Config, out_dir: &Path) -> Result<(), CliError> {
    let start =
        Timestamp::parse(&args.start).map_err(|e| CliError::usage(format!("--start: {e}")))?;
    let end = Timestamp::parse(&args.end).map_err(|e| CliError::usage(format!("--end: {e}")))?;
    if end <= start {
        return Err(CliError::usage("--end must come after --start"));
    }
    let mut currencies = Vec::new();
    for piece in args.currencies.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        currencies.push(
            piece
                .parse::<Currency>()
                .map_err(|e| CliError::usage(format!("--currencies: {e}")))?,
        );
    }

    let (start_year, start_month, _) = start.ymd();
    let family = match args.family {
        Some(f) => f,
        None => FormatFamily::for_month(start_year, start_month).ok_or_else(|| {
            CliError::usage("start month outside the covered range; pass --family")
        })?,
    };

    let cfg = SynthConfig {
        seed: args.seed,
        noise_trades: args.noise,
        planted_actions: args.planted,
        duplicate_rate: args.dup_rate,
        duplicate_fresh_ids: args.dup_fresh_ids,
        multi_currency_share: args.mc_share,
        planted_metaorder_runs: args.meta_runs,
        currencies: currencies.clone(),
        start,
        end,
        family,
        ..SynthConfig::default()
    };
    let ledger = gen_ledger(&cfg).map_err(|e| CliError::usage(format!("{e}")))?;

    // The raw file is named by its starting month so `ingest` can infer the
    // family straight from the file name.
    let raw_name = format!("{start_year:04}-{start_month:02}.csv");
    csvio::write_atomic(&out_dir.join(&raw_name), &render_leaked_csv(&ledger.legs, family))?;
    csvio::write_atomic(&out_dir.join("public.csv"), &render_public_csv(&ledger.public))?;

    let bars = gen_rates(&currencies, start, end, args.rate_volatility, args.seed);
    let mut by_pair: std::collections::BTreeMap<_, Vec<_>> = std::collections::BTreeMap::new();
    for bar in bars {
        by_pair.entry(bar.pair).or_default().push(bar);
    }
    for (pair, pair_bars) in &by_pair {
        let path = out_dir.join("rates").join(format!("{pair}.csv"));
        csvio::write_atomic(&path, &render_rate_csv(pair_bars))?;
    }

    let mut truth = String::new();
    let _ = writeln!(truth, "{}", csvio::TRUTH_SCHEMA);
    let _ = writeln!(truth, "kind,user_id,buy_trade_id,sell_trade_id");
    for planted in &ledger.truth.planted {
        let _ = writeln!(
            truth,
            "planted,{},{},{}",
            planted.user_id, planted.buy_trade_id, planted.sell_trade_id
        );
    }
    for row in &ledger.truth.injected_duplicate_rows {
        let _ = writeln!(truth, "duplicate,{row},,");
    }
    csvio::write_atomic(&out_dir.join("truth.csv"), &truth)?;

    println!(
        "synth: {} legs ({} planted actions, {} duplicate rows, family {}) -> {}",
        ledger.legs.len(),
        ledger.truth.planted.len(),
        ledger.truth.injected_duplicate_rows.len(),
        family.as_str(),
        out_dir.join(raw_name).display()
    );
    Ok(())
}
