//! `profile`: per-user indicators, metaorders, and ability scores.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use triarb_core::profiles::{
    assign_scores, build_profiles, classify_aggressive, detect_metaorders, pca_scores,
    MetaorderConfig, PCA_INDICATORS,
};

use crate::config::Config;
use crate::{csvio, CliError};

#[derive(Args)]
pub struct ProfileArgs {
    /// Actions from `match`.
    #[arg(long, value_name = "FILE")]
    pub actions: PathBuf,
    /// Priced actions from `price`; enables dollar totals on metaorders.
    #[arg(long, value_name = "FILE")]
    pub priced: Option<PathBuf>,
    /// Minimum run length for a metaorder.
    #[arg(long, value_name = "N")]
    pub meta_min_length: Option<usize>,
    /// Maximum gap between consecutive metaorder actions, seconds.
    #[arg(long, value_name = "SECS")]
    pub meta_max_gap: Option<i64>,
}

pub fn run(args: ProfileArgs, config: &Config, out_dir: &Path) -> Result<(), CliError> {
    let actions = csvio::read_actions(&args.actions)?;

    let meta_cfg = MetaorderConfig {
        min_length: match args.meta_min_length {
            Some(v) => v,
            None => config
                .parse::<usize>("meta.min_length")
                .map_err(|e| CliError::usage(format!("{e:#}")))?
                .unwrap_or(5),
        },
        max_gap_secs: match args.meta_max_gap {
            Some(v) => v,
            None => config
                .parse::<i64>("meta.max_gap_secs")
                .map_err(|e| CliError::usage(format!("{e:#}")))?
                .unwrap_or(60),
        },
    };

    // Dollar values joined back from the priced stage when available.
    let usd: Vec<f64> = match &args.priced {
        Some(path) => {
            let priced = csvio::read_priced(path)?;
            let by_key: HashMap<(String, String), f64> = priced
                .iter()
                .map(|p| {
                    (
                        (p.action.buy.trade_id.clone(), p.action.sell.trade_id.clone()),
                        p.usd_equivalent.unwrap_or(0.0),
                    )
                })
                .collect();
            actions
                .iter()
                .map(|a| {
                    by_key
                        .get(&(a.buy.trade_id.clone(), a.sell.trade_id.clone()))
                        .copied()
                        .unwrap_or(0.0)
                })
                .collect()
        }
        None => vec![0.0; actions.len()],
    };

    let metaorders = detect_metaorders(&actions, &usd, &meta_cfg);
    let flags = classify_aggressive(&actions);
    let mut profiles = build_profiles(&actions, &metaorders, &flags);

    let mut pca_text = String::new();
    match pca_scores(&profiles) {
        Ok(pca) => {
            assign_scores(&mut profiles, &pca);
            let _ = writeln!(pca_text, "# triarb-pca v1");
            for (name, loading) in PCA_INDICATORS.iter().zip(pca.loadings.iter()) {
                let _ = writeln!(pca_text, "loading {name} {loading}");
            }
            let _ = writeln!(pca_text, "explained_variance {}", pca.explained_variance);
        }
        Err(e) => {
            eprintln!("profile: ability scores not computed: {e}");
            let _ = writeln!(pca_text, "# triarb-pca v1");
            let _ = writeln!(pca_text, "error {e}");
        }
    }

    csvio::write_profiles(&out_dir.join("profiles.csv"), &profiles)?;
    csvio::write_metaorders(&out_dir.join("metaorders.csv"), &metaorders)?;
    csvio::write_atomic(&out_dir.join("pca.txt"), &pca_text)?;
    println!(
        "profile: {} users, {} metaorders, {} unannotated legs -> {}",
        profiles.len(),
        metaorders.len(),
        flags.unannotated_legs,
        out_dir.join("profiles.csv").display()
    );
    Ok(())
}
