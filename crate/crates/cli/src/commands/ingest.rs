//! `ingest`: raw monthly trade logs to the canonical ledger.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use triarb_core::ledger::{parse_leaked_file, FormatFamily, Leg};

use crate::config::Config;
use crate::{csvio, CliError};

#[derive(Args)]
pub struct IngestArgs {
    /// Raw monthly CSV files, processed in the given order.
    #[arg(required = true, value_name = "FILE")]
    pub files: Vec<PathBuf>,
    /// Format family override applied to every file; by default the family
    /// is inferred from a YYYY-MM filename prefix.
    #[arg(long, value_name = "FAMILY")]
    pub family: Option<FormatFamily>,
}

/// Infer the format family from a `YYYY-MM*` file name.
fn family_from_name(path: &Path) -> Option<FormatFamily> {
    let name = path.file_name()?.to_str()?;
    if name.len() < 7 || name.as_bytes()[4] != b'-' {
        return None;
    }
    let year: i64 = name[0..4].parse().ok()?;
    let month: u32 = name[5..7].parse().ok()?;
    FormatFamily::for_month(year, month)
}

pub fn run(args: IngestArgs, _config: &Config, out_dir: &Path) -> Result<(), CliError> {
    let mut legs: Vec<Leg> = Vec::new();
    let mut report = String::new();
    let mut total_errors = 0usize;

    for path in &args.files {
        let family = args.family.or_else(|| family_from_name(path)).ok_or_else(|| {
            CliError::usage(format!(
                "{}: cannot infer format family from the file name; pass --family",
                path.display()
            ))
        })?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let parsed = parse_leaked_file(&text, family)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let _ = writeln!(
            report,
            "file={} family={} rows={} errors={}",
            path.display(),
            family.as_str(),
            parsed.legs.len(),
            parsed.row_errors.len()
        );
        for err in &parsed.row_errors {
            let _ = writeln!(report, "  {err}");
        }
        total_errors += parsed.row_errors.len();
        legs.extend(parsed.legs);
    }

    csvio::write_ledger(&out_dir.join("ledger.csv"), &legs)?;
    csvio::write_atomic(&out_dir.join("ingest_report.txt"), &report)?;
    println!(
        "ingest: {} legs from {} files ({} malformed rows reported) -> {}",
        legs.len(),
        args.files.len(),
        total_errors,
        out_dir.join("ledger.csv").display()
    );
    Ok(())
}
