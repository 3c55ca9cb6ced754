//! `fees`: fit the expected-fee model and the zero-fee logit, and write
//! them as labeled text tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use triarb_core::fees::{
    build_fee_observations, build_zero_fee_observations, fit_fee_ols, fit_zero_fee_logit,
    FeeSpec, FittedModel, LogitSpec, ZeroFeeLists,
};
use triarb_core::time::Timestamp;

use crate::config::{parse_id_list, Config};
use crate::{csvio, CliError};

#[derive(Args)]
pub struct FeesArgs {
    /// Cleaned ledger from `dedup`.
    #[arg(long, value_name = "FILE")]
    pub ledger: PathBuf,
    /// Expected-fee specification, 1 through 5 (5 = full model).
    #[arg(long, default_value_t = 5)]
    pub spec: u8,
    /// Use raw volumes instead of log volumes (comparison variant).
    #[arg(long)]
    pub linear_volume: bool,
    /// Comma-separated anonymized user ids flagged as anomalous.
    #[arg(long, value_name = "IDS")]
    pub anomalous_users: Option<String>,
    /// Comma-separated days (YYYY-MM-DD) with anomalous zero-fee activity.
    #[arg(long, value_name = "DAYS")]
    pub anomalous_days: Option<String>,
}

fn render_model(kind: &str, spec: u8, model: &FittedModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", csvio::FEE_MODEL_SCHEMA);
    let _ = writeln!(out, "kind {kind}");
    let _ = writeln!(out, "spec {spec}");
    let _ = writeln!(out, "n {}", model.n_observations);
    let _ = writeln!(out, "r_squared {}", model.r_squared);
    let _ = writeln!(out, "iterations {}", model.iterations);
    for ((label, coef), se) in model
        .labels
        .iter()
        .zip(model.coefficients.iter())
        .zip(model.std_errors.iter())
    {
        let _ = writeln!(out, "coef {label} {coef} {se}");
    }
    out
}

pub fn run(args: FeesArgs, config: &Config, out_dir: &Path) -> Result<(), CliError> {
    if !(1..=5).contains(&args.spec) {
        return Err(CliError::usage("--spec must be between 1 and 5"));
    }
    let legs = csvio::read_ledger(&args.ledger)?;

    let observations = build_fee_observations(&legs);
    let ols = fit_fee_ols(&observations, FeeSpec(args.spec), args.linear_volume)
        .map_err(|e| CliError::numeric(format!("fee least squares: {e}")))?;
    csvio::write_atomic(&out_dir.join("fee_ols.txt"), &render_model("ols", args.spec, &ols))?;

    let anomalous_users = match &args.anomalous_users {
        Some(raw) => parse_id_list(raw).map_err(|e| CliError::usage(format!("{e:#}")))?,
        None => config.id_list("users.anomalous").map_err(|e| CliError::usage(format!("{e:#}")))?,
    };
    let days_raw = args
        .anomalous_days
        .clone()
        .or_else(|| config.get("days.anomalous").map(String::from))
        .unwrap_or_default();
    let mut anomalous_days = Vec::new();
    for piece in days_raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        anomalous_days.push(
            Timestamp::parse(piece).map_err(|e| CliError::usage(format!("--anomalous-days: {e}")))?,
        );
    }
    let lists = ZeroFeeLists { anomalous_days, anomalous_users, ..ZeroFeeLists::standard() };

    let zero_obs = build_zero_fee_observations(&legs, &lists);
    let logit_text = match fit_zero_fee_logit(&zero_obs, LogitSpec(args.spec)) {
        Ok(logit) => render_model("logit", args.spec, &logit),
        Err(e) => {
            // A degenerate logit (separation on a synthetic slice, say) is
            // recorded, not fatal: the expected-fee model is the output the
            // rest of the pipeline consumes.
            eprintln!("fees: zero-fee logit not fitted: {e}");
            format!("{}\nkind logit\nspec {}\nerror {e}\n", csvio::FEE_MODEL_SCHEMA, args.spec)
        }
    };
    csvio::write_atomic(&out_dir.join("fee_logit.txt"), &logit_text)?;

    println!(
        "fees: least squares on {} legs (R2 {:.4}) -> {}",
        ols.n_observations,
        ols.r_squared,
        out_dir.join("fee_ols.txt").display()
    );
    Ok(())
}
