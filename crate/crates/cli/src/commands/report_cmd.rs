//! `report`: assemble the summary tables from stage outputs. Every number
//! here is recomputed from the stage CSVs alone.

use std::path::{Path, PathBuf};

use clap::Args;

use triarb_core::time::Timestamp;
use triarb_core::Decimal;

use crate::config::Config;
use crate::{csvio, report, CliError};

/// Parse the external daily-volume series: a `day,usd_volume` CSV.
fn read_external_volumes(path: &Path) -> Result<Vec<(Timestamp, Decimal)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("day")) {
            continue;
        }
        let Some((day, volume)) = line.split_once(',') else {
            return Err(CliError::input(format!("{}: line {}: expected day,usd_volume", path.display(), i + 1)));
        };
        let day = Timestamp::parse(day.trim())
            .map_err(|e| CliError::input(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        let volume: Decimal = volume
            .trim()
            .parse()
            .map_err(|e| CliError::input(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        out.push((day, volume));
    }
    Ok(out)
}

#[derive(Args)]
pub struct ReportArgs {
    /// Priced actions from `price`.
    #[arg(long, value_name = "FILE")]
    pub priced: PathBuf,
    /// User profiles from `profile`.
    #[arg(long, value_name = "FILE")]
    pub profiles: PathBuf,
    /// Metaorders from `profile`; enables the per-user metaorder table.
    #[arg(long, value_name = "FILE")]
    pub metaorders: Option<PathBuf>,
    /// Cleaned ledger; with --external-volumes, enables the daily
    /// volume reconciliation table.
    #[arg(long, value_name = "FILE")]
    pub ledger: Option<PathBuf>,
    /// External daily USD volume series (CSV: day,usd_volume).
    #[arg(long, value_name = "FILE")]
    pub external_volumes: Option<PathBuf>,
}

pub fn run(args: ReportArgs, _config: &Config, out_dir: &Path) -> Result<(), CliError> {
    let priced = csvio::read_priced(&args.priced)?;
    let profiles = csvio::read_profiles(&args.profiles)?;

    csvio::write_atomic(
        &out_dir.join("report_actions.csv"),
        &report::actions_summary(&priced, &profiles),
    )?;
    csvio::write_atomic(
        &out_dir.join("report_action_counts.csv"),
        &report::action_counts(&profiles),
    )?;
    csvio::write_atomic(
        &out_dir.join("report_aggressive.csv"),
        &report::aggressive_summary(&priced, &profiles),
    )?;
    csvio::write_atomic(
        &out_dir.join("report_variables.csv"),
        &report::variables_summary(&priced, &profiles),
    )?;

    if let Some(meta_path) = &args.metaorders {
        let rows =
            csvio::read_rows(meta_path, csvio::METAORDERS_SCHEMA, csvio::METAORDERS_HEADER)?;
        let mut meta_rows = Vec::new();
        for row in rows {
            if row.len() != 9 {
                return Err(CliError::input(format!(
                    "{}: metaorder row has {} fields",
                    meta_path.display(),
                    row.len()
                )));
            }
            meta_rows.push((
                row[0].parse::<i64>().map_err(|e| CliError::input(format!("{e}")))?,
                row[3].parse::<usize>().map_err(|e| CliError::input(format!("{e}")))?,
                row[4].parse::<f64>().map_err(|e| CliError::input(format!("{e}")))?,
                row[5].parse::<f64>().map_err(|e| CliError::input(format!("{e}")))?,
                row[6].parse::<f64>().map_err(|e| CliError::input(format!("{e}")))?,
            ));
        }
        csvio::write_atomic(
            &out_dir.join("report_metaorders.csv"),
            &report::metaorder_users(&meta_rows, &profiles),
        )?;
    }

    if let (Some(ledger_path), Some(volumes_path)) = (&args.ledger, &args.external_volumes) {
        let legs = csvio::read_ledger(ledger_path)?;
        let external = read_external_volumes(volumes_path)?;
        let rows = triarb_core::clean::compare_daily_volumes(&legs, &external);
        let mut out = String::from(
            "# triarb-report-volumes v1\nday,ledger_volume,external_volume,normalized_diff,moving_avg_15d\n",
        );
        for row in rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                row.day, row.ledger_volume, row.external_volume, row.normalized_diff, row.moving_avg
            ));
        }
        csvio::write_atomic(&out_dir.join("report_volumes.csv"), &out)?;
    } else if args.ledger.is_some() || args.external_volumes.is_some() {
        return Err(CliError::usage(
            "the volume reconciliation needs both --ledger and --external-volumes",
        ));
    }

    csvio::write_atomic(&out_dir.join("summary.txt"), &report::text_summary(&priced, &profiles))?;
    println!(
        "report: {} actions, {} users -> {}",
        priced.len(),
        profiles.len(),
        out_dir.join("summary.txt").display()
    );
    Ok(())
}
