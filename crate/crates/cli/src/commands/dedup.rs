//! `dedup`: duplicate removal, sanity filters, sample restriction, the
//! public-dataset merge, same-second aggregation, and anonymization --
//! in that order.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use triarb_core::clean::{
    aggregate_same_second, anonymize_users, dedup, merge_public, restrict_sample, sanity_filter,
    DedupMethod, SanityOptions,
};
use triarb_core::ledger::parse_public_file;
use triarb_core::time::Timestamp;

use crate::config::{parse_id_list, Config};
use crate::{csvio, CliError};

#[derive(Args)]
pub struct DedupArgs {
    /// Canonical ledger from `ingest`.
    #[arg(long, value_name = "FILE")]
    pub ledger: PathBuf,
    /// Public aggregate trade file, used for corrections and annotations.
    #[arg(long, value_name = "FILE")]
    pub public: Option<PathBuf>,
    /// Duplicate-detection method: conservative, aggressive, trade-id, pairs.
    #[arg(long, value_name = "METHOD")]
    pub method: Option<DedupMethod>,
    /// Sample cutoff; legs at or after this instant are dropped.
    /// `none` disables the restriction.
    #[arg(long, value_name = "WHEN")]
    pub cutoff: Option<String>,
    /// Keep (flagged) the primary legs of incomplete multi-currency trades.
    #[arg(long)]
    pub include_thk_primaries: bool,
    /// Comma-separated original ids of the bot accounts to collapse.
    #[arg(long, value_name = "IDS")]
    pub willy_ids: Option<String>,
    /// Write the anonymization mapping to this path (otherwise discarded).
    #[arg(long, value_name = "FILE")]
    pub anonymize_map: Option<PathBuf>,
    /// Skip same-second aggregation.
    #[arg(long)]
    pub no_aggregate: bool,
}

pub fn run(args: DedupArgs, config: &Config, out_dir: &Path) -> Result<(), CliError> {
    let legs = csvio::read_ledger(&args.ledger)?;

    let method = match args.method {
        Some(m) => m,
        None => config
            .parse::<DedupMethod>("dedup.method")
            .map_err(|e| CliError::usage(format!("{e:#}")))?
            .unwrap_or(DedupMethod::TradeId),
    };

    let public = match &args.public {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            let parsed = parse_public_file(&text)
                .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            parsed.records
        }
        None => Vec::new(),
    };

    let cutoff_raw = args
        .cutoff
        .or_else(|| config.get("sample.cutoff").map(String::from))
        .unwrap_or_else(|| String::from("2013-04-01 00:00:00"));
    let cutoff = if cutoff_raw.eq_ignore_ascii_case("none") {
        None
    } else {
        Some(
            Timestamp::parse(&cutoff_raw)
                .map_err(|e| CliError::usage(format!("--cutoff: {e}")))?,
        )
    };

    let willy_ids = match &args.willy_ids {
        Some(raw) => parse_id_list(raw).map_err(|e| CliError::usage(format!("{e:#}")))?,
        None => config.id_list("users.willy").map_err(|e| CliError::usage(format!("{e:#}")))?,
    };
    let opts = SanityOptions {
        include_thk_primaries: args.include_thk_primaries,
        willy_ids,
        ..SanityOptions::default()
    };

    let (deduped, mut report) = dedup(&legs, method);
    let (sane, sanity_report) = sanity_filter(&deduped, &public, &opts);
    report.absorb(&sanity_report);

    let restricted = match cutoff {
        Some(at) => restrict_sample(&sane, at),
        None => sane,
    };
    let restricted_away = report.surviving_rows - restricted.len();

    let (merged, merge_stats) = if public.is_empty() {
        (restricted, triarb_core::clean::MergeStats::default())
    } else {
        merge_public(&restricted, &public)
    };

    let aggregated = if args.no_aggregate { merged } else { aggregate_same_second(&merged) };
    let (cleaned, mapping) = anonymize_users(&aggregated);

    csvio::write_ledger(&out_dir.join("clean.csv"), &cleaned)?;
    // The report proper reconciles over the dedup and sanity passes; the
    // later stages are appended as their own counters.
    debug_assert!(report.reconciles());
    let mut text = report.to_string();
    let _ = writeln!(text);
    let _ = writeln!(text, "dedup_method={}", method.as_str());
    let _ = writeln!(text, "cutoff_removed={restricted_away}");
    let _ = writeln!(text, "public_matched={}", merge_stats.matched);
    let _ = writeln!(text, "public_missed={}", merge_stats.missed);
    let _ = writeln!(text, "final_rows={}", cleaned.len());
    csvio::write_atomic(&out_dir.join("clean_report.txt"), &text)?;

    if let Some(map_path) = &args.anonymize_map {
        let mut map_text = String::from("original_id,anonymized_id\n");
        for (orig, new) in &mapping {
            let _ = writeln!(map_text, "{orig},{new}");
        }
        csvio::write_atomic(map_path, &map_text)?;
    }

    println!(
        "dedup: {} rows in, {} rows out ({}) -> {}",
        legs.len(),
        cleaned.len(),
        method.as_str(),
        out_dir.join("clean.csv").display()
    );
    Ok(())
}
