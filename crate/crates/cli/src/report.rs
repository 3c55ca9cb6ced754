//! Assembly of the summary report tables from stage outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use triarb_core::decimal_to_f64;
use triarb_core::pricing::PricedAction;
use triarb_core::profiles::UserProfile;
use triarb_core::stats::{percentile, summarize};

pub const SUMMARY_HEADER: &str = "panel,metric,n,mean,std,min,p25,p50,p75,max";

type PanelFilter<'a> = Box<dyn Fn(&PricedAction) -> bool + 'a>;
/// Per-metaorder fields as read back from the stage file:
/// (user, length, mean gap, total bitcoins, total dollars).
pub type MetaRow = (i64, usize, f64, f64, f64);

fn summary_row(panel: &str, metric: &str, values: &[f64]) -> String {
    let s = summarize(values);
    format!(
        "{panel},{metric},{},{},{},{},{},{},{},{}\n",
        s.n, s.mean, s.std_dev, s.min, s.p25, s.p50, s.p75, s.max
    )
}

fn spread_values(priced: &[PricedAction], pick: impl Fn(&PricedAction) -> Option<f64>) -> Vec<f64> {
    priced.iter().filter_map(pick).collect()
}

/// Per-action descriptive statistics, split into all / single-market /
/// multi-market panels by the acting user's profile.
pub fn actions_summary(priced: &[PricedAction], profiles: &[UserProfile]) -> String {
    let multi: BTreeSet<i64> =
        profiles.iter().filter(|p| p.d_currencies).map(|p| p.user_id).collect();
    let mut out = String::from("# triarb-report-actions v1\n");
    out.push_str(SUMMARY_HEADER);
    out.push('\n');

    let panels: [(&str, PanelFilter); 3] = [
        ("all", Box::new(|_: &PricedAction| true)),
        ("single-market", Box::new(|p: &PricedAction| !multi.contains(&p.action.user_id))),
        ("multi-market", Box::new(|p: &PricedAction| multi.contains(&p.action.user_id))),
    ];
    for (panel, keep) in &panels {
        let subset: Vec<&PricedAction> = priced.iter().filter(|p| keep(p)).collect();
        let own = |f: &dyn Fn(&PricedAction) -> Option<f64>| -> Vec<f64> {
            subset.iter().filter_map(|p| f(p)).collect()
        };
        out.push_str(&summary_row(panel, "spread_actual_pct", &own(&|p| p.spread_actual_pct)));
        out.push_str(&summary_row(
            panel,
            "spread_expected_pct",
            &own(&|p| p.spread_expected_pct),
        ));
        out.push_str(&summary_row(panel, "spread_no_fees_pct", &own(&|p| p.spread_no_fees_pct)));
        out.push_str(&summary_row(
            panel,
            "bitcoins",
            &own(&|p| Some(decimal_to_f64(p.action.buy.bitcoins))),
        ));
        out.push_str(&summary_row(panel, "usd_equivalent", &own(&|p| p.usd_equivalent)));
        out.push_str(&summary_row(
            panel,
            "time_delta_secs",
            &own(&|p| Some(p.action.time_delta_secs as f64)),
        ));
        out.push_str(&summary_row(
            panel,
            "volume_delta_pct",
            &own(&|p| Some(decimal_to_f64(p.action.volume_delta_pct))),
        ));
    }
    out
}

/// Statistics on per-user action counts by market group, with upper
/// percentiles.
pub fn action_counts(profiles: &[UserProfile]) -> String {
    let mut out = String::from(
        "# triarb-report-counts v1\ngroup,n_users,mean,std,min,p25,p50,p75,p90,p95,max\n",
    );
    for (group, keep) in [("single", false), ("multiple", true)] {
        let counts: Vec<f64> = profiles
            .iter()
            .filter(|p| p.d_currencies == keep)
            .map(|p| p.n_actions as f64)
            .collect();
        let s = summarize(&counts);
        let _ = writeln!(
            out,
            "{group},{},{},{},{},{},{},{},{},{},{}",
            s.n,
            s.mean,
            s.std_dev,
            s.min,
            s.p25,
            s.p50,
            s.p75,
            percentile(&counts, 0.90),
            percentile(&counts, 0.95),
            s.max
        );
    }
    out
}

/// One row per metaorder-running user: share of their actions inside
/// metaorders and averages over their runs.
pub fn metaorder_users(meta_rows: &[MetaRow], profiles: &[UserProfile]) -> String {
    let by_user: BTreeMap<i64, usize> =
        profiles.iter().map(|p| (p.user_id, p.n_actions)).collect();
    let mut grouped: BTreeMap<i64, Vec<&MetaRow>> = BTreeMap::new();
    for row in meta_rows {
        grouped.entry(row.0).or_default().push(row);
    }
    let mut out = String::from(
        "# triarb-report-metaorders v1\nuser_id,pct_of_actions,n_metaorders,avg_length,avg_gap_secs,avg_bitcoins,avg_usd\n",
    );
    for (user, rows) in grouped {
        let total_in_meta: usize = rows.iter().map(|r| r.1).sum();
        let n_actions = by_user.get(&user).copied().unwrap_or(0).max(1);
        let k = rows.len() as f64;
        let _ = writeln!(
            out,
            "{user},{},{},{},{},{},{}",
            100.0 * total_in_meta as f64 / n_actions as f64,
            rows.len(),
            rows.iter().map(|r| r.1 as f64).sum::<f64>() / k,
            rows.iter().map(|r| r.2).sum::<f64>() / k,
            rows.iter().map(|r| r.3).sum::<f64>() / k,
            rows.iter().map(|r| r.4).sum::<f64>() / k,
        );
    }
    out
}

/// Statistics over the aggressive subset: how active their users are, how
/// profitable the actions were, and how often they came from multi-market
/// users.
pub fn aggressive_summary(priced: &[PricedAction], profiles: &[UserProfile]) -> String {
    let by_user: BTreeMap<i64, &UserProfile> =
        profiles.iter().map(|p| (p.user_id, p)).collect();
    let aggressive: Vec<&PricedAction> = priced
        .iter()
        .filter(|p| {
            p.action.buy.aggressive.unwrap_or(false) || p.action.sell.aggressive.unwrap_or(false)
        })
        .collect();
    let mut out = String::from("# triarb-report-aggressive v1\n");
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    let n_actions: Vec<f64> = aggressive
        .iter()
        .filter_map(|p| by_user.get(&p.action.user_id).map(|u| u.n_actions as f64))
        .collect();
    let spreads: Vec<f64> = aggressive.iter().filter_map(|p| p.spread_actual_pct).collect();
    let d_cur: Vec<f64> = aggressive
        .iter()
        .filter_map(|p| {
            by_user
                .get(&p.action.user_id)
                .map(|u| if u.d_currencies { 1.0 } else { 0.0 })
        })
        .collect();
    out.push_str(&summary_row("aggressive", "user_action_count", &n_actions));
    out.push_str(&summary_row("aggressive", "spread_actual_pct", &spreads));
    out.push_str(&summary_row("aggressive", "d_currencies", &d_cur));
    out
}

/// Summary statistics of every variable entering the regressions, over the
/// action sample (user-level indicators broadcast to actions).
pub fn variables_summary(priced: &[PricedAction], profiles: &[UserProfile]) -> String {
    let by_user: BTreeMap<i64, &UserProfile> =
        profiles.iter().map(|p| (p.user_id, p)).collect();
    let mut out = String::from("# triarb-report-variables v1\n");
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    out.push_str(&summary_row(
        "actions",
        "spread_actual_pct",
        &spread_values(priced, |p| p.spread_actual_pct),
    ));
    out.push_str(&summary_row(
        "actions",
        "usd_equivalent",
        &spread_values(priced, |p| p.usd_equivalent),
    ));
    out.push_str(&summary_row(
        "actions",
        "rate_change_pct",
        &spread_values(priced, |p| p.rate_change_pct),
    ));
    let broadcast = |f: &dyn Fn(&UserProfile) -> f64| -> Vec<f64> {
        priced
            .iter()
            .filter_map(|p| by_user.get(&p.action.user_id).map(|u| f(u)))
            .collect()
    };
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    out.push_str(&summary_row("actions", "d_currencies", &broadcast(&|u| b(u.d_currencies))));
    out.push_str(&summary_row("actions", "log_currencies", &broadcast(&|u| u.log_currencies)));
    out.push_str(&summary_row("actions", "log_actions", &broadcast(&|u| u.log_actions)));
    out.push_str(&summary_row("actions", "d_metaorder", &broadcast(&|u| b(u.d_metaorder))));
    out.push_str(&summary_row("actions", "d_aggressive", &broadcast(&|u| b(u.d_aggressive))));
    out.push_str(&summary_row(
        "actions",
        "pc1",
        &broadcast(&|u| u.pc1_score.unwrap_or(f64::NAN)),
    ));
    out
}

/// A short plain-text digest of the pipeline outputs.
pub fn text_summary(priced: &[PricedAction], profiles: &[UserProfile]) -> String {
    let mut out = String::new();
    let n_multi = profiles.iter().filter(|p| p.d_currencies).count();
    let spreads: Vec<f64> = priced.iter().filter_map(|p| p.spread_actual_pct).collect();
    let usd: Vec<f64> = priced.iter().filter_map(|p| p.usd_equivalent).collect();
    let excluded = priced.iter().filter(|p| p.excluded_missing_rate).count();
    let _ = writeln!(out, "actions: {}", priced.len());
    let _ = writeln!(out, "arbitrageurs: {}", profiles.len());
    let _ = writeln!(out, "single-market users: {}", profiles.len() - n_multi);
    let _ = writeln!(out, "multi-market users: {n_multi}");
    let _ = writeln!(out, "excluded for missing rates: {excluded}");
    let s = summarize(&spreads);
    let _ = writeln!(out, "mean spread (actual fees, %): {:.4} (sd {:.4})", s.mean, s.std_dev);
    let u = summarize(&usd);
    let _ = writeln!(out, "mean dollar value: {:.2}", u.mean);
    out
}
