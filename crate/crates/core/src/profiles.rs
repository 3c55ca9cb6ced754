//! Per-user expertise indicators: market counts, action counts, metaorder
//! detection, aggressiveness, the first-principal-component ability score,
//! and the learning-by-doing filter.

use core::fmt;

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use libm::{log, sqrt};
use rust_decimal::Decimal;

use crate::currency::{Currency, Dyad};
use crate::linalg::{jacobi_eigen, Mat};
use crate::matcher::ArbitrageAction;
use crate::stats;
use crate::time::{Timestamp, SECS_PER_DAY};

/// Per-arbitrageur indicators.
#[derive(Clone, Debug)]
pub struct UserProfile {
    pub user_id: i64,
    /// Distinct dyads with at least one action.
    pub n_markets: usize,
    /// Distinct fiat currencies appearing in the user's action legs.
    pub n_fiat_currencies: usize,
    /// 1 when the user arbitraged across multiple markets (at least three
    /// fiat currencies / at least two dyads).
    pub d_currencies: bool,
    pub n_actions: usize,
    /// Natural log of the action count.
    pub log_actions: f64,
    /// Natural log of the fiat-currency count.
    pub log_currencies: f64,
    pub d_metaorder: bool,
    pub d_aggressive: bool,
    /// First-principal-component ability score; `None` until scored.
    pub pc1_score: Option<f64>,
    /// Days between the first action and the first action in a different
    /// market; `None` for single-market users.
    pub days_to_new_market: Option<i64>,
}

/// A maximal run of same-user, same-market, same-direction actions with
/// bounded gaps.
#[derive(Clone, Debug)]
pub struct Metaorder {
    pub user_id: i64,
    pub dyad: Dyad,
    /// Orientation of the run: (buy currency, sell currency).
    pub direction: (Currency, Currency),
    /// Indices into the action slice passed to the detector, time-ordered.
    pub members: Vec<usize>,
    pub length: usize,
    /// Mean delay between consecutive member actions, seconds.
    pub mean_gap_secs: f64,
    /// Total bitcoins moved (buy-leg volumes).
    pub total_bitcoins: Decimal,
    /// Total dollar-equivalent value of the members.
    pub total_usd: f64,
    pub start: Timestamp,
    pub end: Timestamp,
}

/// Detection parameters: a run qualifies with at least `min_length` actions
/// and every consecutive gap at most `max_gap_secs`.
#[derive(Clone, Copy, Debug)]
pub struct MetaorderConfig {
    pub min_length: usize,
    pub max_gap_secs: i64,
}

impl Default for MetaorderConfig {
    fn default() -> Self {
        MetaorderConfig { min_length: 5, max_gap_secs: 60 }
    }
}

/// Detect maximal metaorder runs. `usd_equivalent` must align with
/// `actions` (zeros are fine when dollar values are not needed).
pub fn detect_metaorders(
    actions: &[ArbitrageAction],
    usd_equivalent: &[f64],
    cfg: &MetaorderConfig,
) -> Vec<Metaorder> {
    assert!(usd_equivalent.is_empty() || usd_equivalent.len() == actions.len());

    // Runs live inside one (user, dyad, direction) stream, time-ordered.
    let mut streams: BTreeMap<(i64, Dyad, (Currency, Currency)), Vec<usize>> = BTreeMap::new();
    for (i, action) in actions.iter().enumerate() {
        let direction = (action.buy.currency, action.sell.currency);
        streams
            .entry((action.user_id, action.dyad, direction))
            .or_default()
            .push(i);
    }

    let mut out = Vec::new();
    for ((user_id, dyad, direction), mut indices) in streams {
        indices.sort_by_key(|&i| (actions[i].time(), i));
        let mut run: Vec<usize> = Vec::new();
        let flush = |run: &mut Vec<usize>, out: &mut Vec<Metaorder>| {
            if run.len() >= cfg.min_length {
                let times: Vec<i64> = run.iter().map(|&i| actions[i].time().unix()).collect();
                let gaps: f64 = times.windows(2).map(|w| (w[1] - w[0]) as f64).sum();
                let total_usd = if usd_equivalent.is_empty() {
                    0.0
                } else {
                    run.iter().map(|&i| usd_equivalent[i]).sum()
                };
                out.push(Metaorder {
                    user_id,
                    dyad,
                    direction,
                    length: run.len(),
                    mean_gap_secs: gaps / (run.len() - 1) as f64,
                    total_bitcoins: run.iter().map(|&i| actions[i].buy.bitcoins).sum(),
                    total_usd,
                    start: actions[run[0]].time(),
                    end: actions[*run.last().unwrap()].time(),
                    members: core::mem::take(run),
                });
            } else {
                run.clear();
            }
        };
        for &i in &indices {
            match run.last() {
                Some(&prev)
                    if actions[i].time().unix() - actions[prev].time().unix()
                        <= cfg.max_gap_secs =>
                {
                    run.push(i);
                }
                Some(_) => {
                    flush(&mut run, &mut out);
                    run.push(i);
                }
                None => run.push(i),
            }
        }
        flush(&mut run, &mut out);
    }
    out
}

/// Per-action aggressiveness: an action is aggressive when either leg
/// initiated a market order. Legs without annotation are counted.
#[derive(Clone, Debug, Default)]
pub struct AggressiveFlags {
    pub action_aggressive: Vec<bool>,
    pub unannotated_legs: usize,
}

pub fn classify_aggressive(actions: &[ArbitrageAction]) -> AggressiveFlags {
    let mut flags = AggressiveFlags {
        action_aggressive: Vec::with_capacity(actions.len()),
        unannotated_legs: 0,
    };
    for action in actions {
        for leg in [&action.buy, &action.sell] {
            if leg.aggressive.is_none() {
                flags.unannotated_legs += 1;
            }
        }
        let aggressive = action.buy.aggressive.unwrap_or(false)
            || action.sell.aggressive.unwrap_or(false);
        flags.action_aggressive.push(aggressive);
    }
    flags
}

/// Build one profile per user from matched, classified actions.
pub fn build_profiles(
    actions: &[ArbitrageAction],
    metaorders: &[Metaorder],
    aggressive: &AggressiveFlags,
) -> Vec<UserProfile> {
    let mut by_user: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, action) in actions.iter().enumerate() {
        by_user.entry(action.user_id).or_default().push(i);
    }
    let meta_users: alloc::collections::BTreeSet<i64> =
        metaorders.iter().map(|m| m.user_id).collect();

    let mut profiles = Vec::with_capacity(by_user.len());
    for (user_id, indices) in by_user {
        let mut dyads: Vec<Dyad> = indices.iter().map(|&i| actions[i].dyad).collect();
        dyads.sort_unstable();
        dyads.dedup();
        let mut currencies: Vec<Currency> = indices
            .iter()
            .flat_map(|&i| [actions[i].buy.currency, actions[i].sell.currency])
            .collect();
        currencies.sort_unstable();
        currencies.dedup();

        let d_aggressive = indices.iter().any(|&i| aggressive.action_aggressive[i]);
        let n_actions = indices.len();

        // Days from the user's first action to the first action in a market
        // other than the first one.
        let mut ordered = indices.clone();
        ordered.sort_by_key(|&i| (actions[i].time(), i));
        let first_time = actions[ordered[0]].time();
        let first_dyad = actions[ordered[0]].dyad;
        let days_to_new_market = ordered
            .iter()
            .find(|&&i| actions[i].dyad != first_dyad)
            .map(|&i| (actions[i].time().unix() - first_time.unix()).div_euclid(SECS_PER_DAY));

        profiles.push(UserProfile {
            user_id,
            n_markets: dyads.len(),
            n_fiat_currencies: currencies.len(),
            d_currencies: dyads.len() >= 2,
            n_actions,
            log_actions: log(n_actions as f64),
            log_currencies: log(currencies.len() as f64),
            d_metaorder: meta_users.contains(&user_id),
            d_aggressive,
            pc1_score: None,
            days_to_new_market,
        });
    }
    profiles
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PcaError {
    /// An indicator has zero variance across users.
    DegenerateCovariance,
    /// Fewer than two users.
    TooFewUsers,
}

impl fmt::Display for PcaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PcaError::DegenerateCovariance => f.write_str("an indicator has zero variance"),
            PcaError::TooFewUsers => f.write_str("too few users for a component analysis"),
        }
    }
}

/// First principal component of the four ability indicators.
#[derive(Clone, Debug)]
pub struct PcaResult {
    /// Loadings on (multi-market dummy, log actions, metaorder dummy,
    /// aggressive dummy), unit norm, log-actions loading positive.
    pub loadings: [f64; 4],
    /// Share of total variance explained by the first component, in [0, 1].
    pub explained_variance: f64,
    /// Per-user scores, aligned with the input profiles.
    pub scores: Vec<f64>,
}

pub const PCA_INDICATORS: [&str; 4] =
    ["d_currencies", "log_actions", "d_metaorder", "d_aggressive"];

fn indicator_values(profiles: &[UserProfile]) -> [Vec<f64>; 4] {
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    [
        profiles.iter().map(|p| b(p.d_currencies)).collect(),
        profiles.iter().map(|p| p.log_actions).collect(),
        profiles.iter().map(|p| b(p.d_metaorder)).collect(),
        profiles.iter().map(|p| b(p.d_aggressive)).collect(),
    ]
}

/// Principal component analysis of the z-scored ability indicators over the
/// user sample.
///
/// z-scores use the population standard deviation so that scores are
/// reproducible; the correlation matrix itself is unaffected by that choice.
/// The loading sign is fixed by requiring a positive loading on the action
/// count. Per-user scores are the dot products of the loading vector with
/// the z-scored indicators.
pub fn pca_scores(profiles: &[UserProfile]) -> Result<PcaResult, PcaError> {
    let n = profiles.len();
    if n < 2 {
        return Err(PcaError::TooFewUsers);
    }
    let raw = indicator_values(profiles);
    let mut z: Vec<Vec<f64>> = Vec::with_capacity(4);
    for column in &raw {
        let mean = stats::mean(column);
        let sd = stats::population_std_dev(column);
        if sd == 0.0 {
            return Err(PcaError::DegenerateCovariance);
        }
        z.push(column.iter().map(|v| (v - mean) / sd).collect());
    }

    // Correlation matrix of the z-scores.
    let mut corr = Mat::zeros(4, 4);
    for a in 0..4 {
        for b in a..4 {
            let mut s = 0.0;
            for i in 0..n {
                s += z[a][i] * z[b][i];
            }
            s /= n as f64;
            corr.set(a, b, s);
            corr.set(b, a, s);
        }
    }

    let (values, vectors) = jacobi_eigen(&corr);
    let mut loadings = [0.0; 4];
    loadings.copy_from_slice(&vectors.row(0)[..4]);
    // Sign convention: the action-count loading is positive.
    if loadings[1] < 0.0 {
        for l in loadings.iter_mut() {
            *l = -*l;
        }
    }
    let norm = sqrt(loadings.iter().map(|l| l * l).sum::<f64>());
    for l in loadings.iter_mut() {
        *l /= norm;
    }

    let trace: f64 = values.iter().sum();
    let explained = if trace > 0.0 { values[0] / trace } else { 0.0 };

    let scores = (0..n)
        .map(|i| (0..4).map(|a| loadings[a] * z[a][i]).sum())
        .collect();
    Ok(PcaResult { loadings, explained_variance: explained, scores })
}

/// Attach PCA scores to the profiles they were computed from.
pub fn assign_scores(profiles: &mut [UserProfile], pca: &PcaResult) {
    for (profile, score) in profiles.iter_mut().zip(pca.scores.iter()) {
        profile.pc1_score = Some(*score);
    }
}

/// Drop all actions of multi-market users who entered their second market
/// later than `max_days` days after their first action. Single-market users
/// are untouched.
pub fn learning_filter(
    profiles: &[UserProfile],
    actions: &[ArbitrageAction],
    max_days: i64,
) -> Vec<ArbitrageAction> {
    let late: alloc::collections::BTreeSet<i64> = profiles
        .iter()
        .filter(|p| matches!(p.days_to_new_market, Some(d) if d > max_days))
        .map(|p| p.user_id)
        .collect();
    actions
        .iter()
        .filter(|a| !late.contains(&a.user_id))
        .cloned()
        .collect()
}
