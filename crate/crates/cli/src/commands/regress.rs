//! `regress`: the ability-level and rate-interaction regression tables.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use triarb_core::econ::{
    assemble_panel, run_ability_regression, run_interaction_regression, AbilityProxy,
    RegressionResult,
};
use triarb_core::pricing::{FeeRegime, PricedAction};
use triarb_core::profiles::UserProfile;

use crate::config::Config;
use crate::{csvio, CliError};

#[derive(Args)]
pub struct RegressArgs {
    /// Priced actions from `price`.
    #[arg(long, value_name = "FILE")]
    pub priced: PathBuf,
    /// User profiles from `profile`.
    #[arg(long, value_name = "FILE")]
    pub profiles: PathBuf,
    /// Spread regime for the outcome: actual, no-fees, expected.
    #[arg(long, value_name = "REGIME")]
    pub regime: Option<FeeRegime>,
    /// Drop actions of multi-market users who entered their second market
    /// after this many days.
    #[arg(long, value_name = "DAYS")]
    pub learning_days: Option<i64>,
}

pub struct TableWriter {
    out: String,
}

impl TableWriter {
    pub fn new() -> Self {
        TableWriter { out: String::from("# triarb-regressions v1\ntable,column,term,value,std_error,stars\n") }
    }

    pub fn push(&mut self, table: &str, column: usize, result: &RegressionResult) {
        for (j, name) in result.names.iter().enumerate() {
            let _ = writeln!(
                self.out,
                "{table},{column},{name},{},{},{}",
                result.coefficients[j],
                result.std_errors[j],
                result.stars(j),
            );
        }
        let _ = writeln!(
            self.out,
            "{table},{column},constant,{},{},",
            result.constant,
            result.constant_se.map(|v| v.to_string()).unwrap_or_default(),
        );
        let _ = writeln!(self.out, "{table},{column},n,{},,", result.n_used);
        let _ = writeln!(self.out, "{table},{column},r_squared,{},,", result.r_squared);
        let _ = writeln!(self.out, "{table},{column},n_clusters,{},,", result.n_clusters);
        let _ = writeln!(
            self.out,
            "{table},{column},dropped_singletons,{},,",
            result.n_dropped_singletons
        );
    }

    pub fn push_error(&mut self, table: &str, column: usize, error: impl std::fmt::Display) {
        let _ = writeln!(self.out, "{table},{column},error,{error},,");
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// Apply the learning-by-doing filter on priced actions via the profiles'
/// recorded market-entry delays.
pub fn learning_filter_priced(
    priced: &[PricedAction],
    profiles: &[UserProfile],
    max_days: i64,
) -> Vec<PricedAction> {
    let late: BTreeSet<i64> = profiles
        .iter()
        .filter(|p| matches!(p.days_to_new_market, Some(d) if d > max_days))
        .map(|p| p.user_id)
        .collect();
    priced.iter().filter(|p| !late.contains(&p.action.user_id)).cloned().collect()
}

pub fn run(args: RegressArgs, config: &Config, out_dir: &Path) -> Result<(), CliError> {
    let mut priced = csvio::read_priced(&args.priced)?;
    let profiles = csvio::read_profiles(&args.profiles)?;
    let regime = match args.regime {
        Some(r) => r,
        None => config
            .parse::<FeeRegime>("fees.regime")
            .map_err(|e| CliError::usage(format!("{e:#}")))?
            .unwrap_or(FeeRegime::Actual),
    };
    let learning_days = match args.learning_days {
        Some(d) => Some(d),
        None => config
            .parse::<i64>("learning.max_days")
            .map_err(|e| CliError::usage(format!("{e:#}")))?,
    };
    if let Some(days) = learning_days {
        priced = learning_filter_priced(&priced, &profiles, days);
    }

    let mut writer = TableWriter::new();

    // Baseline table: the multi-market dummy across the four fixed-effect
    // layouts (none, dyad, hour, both).
    let layouts = [(false, false), (false, true), (true, false), (true, true)];
    for (column, &(fe_hour, fe_dyad)) in layouts.iter().enumerate() {
        let rows =
            assemble_panel(&priced, &profiles, AbilityProxy::MultiMarket, regime, false);
        match run_ability_regression(&rows, AbilityProxy::MultiMarket.label(), fe_hour, fe_dyad)
        {
            Ok(result) => writer.push("ability-baseline", column + 1, &result),
            Err(e) => writer.push_error("ability-baseline", column + 1, e),
        }
    }

    // Alternative proxies, both fixed effects.
    for (column, proxy) in AbilityProxy::ALL.iter().enumerate() {
        let rows = assemble_panel(&priced, &profiles, *proxy, regime, false);
        match run_ability_regression(&rows, proxy.label(), true, true) {
            Ok(result) => writer.push("ability-proxies", column + 1, &result),
            Err(e) => writer.push_error("ability-proxies", column + 1, e),
        }
    }

    // Rate-interaction table: per proxy, a column without and with the full
    // fixed-effect set.
    let mut column = 0;
    for proxy in AbilityProxy::ALL {
        for with_fe in [false, true] {
            column += 1;
            let rows = assemble_panel(&priced, &profiles, proxy, regime, true);
            match run_interaction_regression(&rows, proxy.label(), with_fe) {
                Ok(result) => writer.push("rate-interaction", column, &result),
                Err(e) => writer.push_error("rate-interaction", column, e),
            }
        }
    }

    let path = out_dir.join("regressions.csv");
    csvio::write_atomic(&path, &writer.finish())?;
    println!(
        "regress: {} actions, {} profiles, regime {} -> {}",
        priced.len(),
        profiles.len(),
        regime.as_str(),
        path.display()
    );
    Ok(())
}
