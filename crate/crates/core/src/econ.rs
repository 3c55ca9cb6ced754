//! Least squares with multi-way fixed effects, user-clustered standard
//! errors, and the two regression families built on them.
//!
//! Fixed effects are absorbed by alternating demeaning rather than dummy
//! columns, so hour-level effects stay cheap. Observations alone in any
//! fixed-effect cell are dropped (iteratively) before estimation. Standard
//! errors cluster at the user level with the G/(G-1) * (N-1)/(N-K)
//! small-sample factor, K counting regressors plus absorbed effects.

use core::fmt;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

use crate::linalg::{cholesky_inverse, normal_equations, Mat};
use crate::pricing::{FeeRegime, PricedAction};
use crate::profiles::UserProfile;

const DEMEAN_TOL: f64 = 1e-10;
const DEMEAN_MAX_SWEEPS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EconError {
    /// The design lost rank after absorbing the fixed effects.
    RankDeficient,
    /// Iterated singleton dropping consumed the whole sample.
    EmptyAfterSingletonDrop,
    /// Fewer than two clusters.
    SingleCluster,
    /// A regression input was malformed (lengths disagree, missing data).
    BadInput,
}

impl fmt::Display for EconError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EconError::RankDeficient => f.write_str("design is rank deficient"),
            EconError::EmptyAfterSingletonDrop => {
                f.write_str("no observations left after dropping singleton cells")
            }
            EconError::SingleCluster => f.write_str("need at least two clusters"),
            EconError::BadInput => f.write_str("malformed regression input"),
        }
    }
}

/// Coefficients with cluster-robust standard errors and bookkeeping.
#[derive(Clone, Debug)]
pub struct RegressionResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Grand-mean constant. Reported with a standard error only when no
    /// fixed effects are absorbed.
    pub constant: f64,
    pub constant_se: Option<f64>,
    /// Overall R-squared, computed against the raw outcome.
    pub r_squared: f64,
    pub n_used: usize,
    pub n_dropped_singletons: usize,
    pub n_clusters: usize,
    /// Level counts of each absorbed fixed-effect dimension.
    pub fe_levels: Vec<usize>,
}

impl RegressionResult {
    pub fn coefficient(&self, name: &str) -> Option<(f64, f64)> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| (self.coefficients[i], self.std_errors[i]))
    }

    /// Significance stars at the 0.1 / 0.05 / 0.01 levels (normal critical
    /// values), as printed in the result tables.
    pub fn stars(&self, index: usize) -> &'static str {
        let t = self.coefficients[index] / self.std_errors[index];
        let t = libm::fabs(t);
        if t >= 2.576 {
            "***"
        } else if t >= 1.96 {
            "**"
        } else if t >= 1.645 {
            "*"
        } else {
            ""
        }
    }
}

/// Map arbitrary group labels to dense indices.
fn dense_groups(labels: &[i64]) -> (Vec<usize>, usize) {
    let mut map: BTreeMap<i64, usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(labels.len());
    for &l in labels {
        let next = map.len();
        let id = *map.entry(l).or_insert(next);
        out.push(id);
    }
    (out, map.len())
}

/// Iteratively drop observations that sit alone in a cell of any dimension.
fn drop_singletons(fe: &[Vec<i64>], n: usize) -> Vec<usize> {
    let mut alive: Vec<bool> = vec![true; n];
    loop {
        let mut changed = false;
        for dim in fe {
            let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
            for i in 0..n {
                if alive[i] {
                    *counts.entry(dim[i]).or_insert(0) += 1;
                }
            }
            for i in 0..n {
                if alive[i] && counts[&dim[i]] == 1 {
                    alive[i] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (0..n).filter(|&i| alive[i]).collect()
}

/// Demean the columns across all dimensions by alternating projections,
/// until every cell mean is below tolerance.
fn absorb_fixed_effects(columns: &mut [Vec<f64>], dims: &[(Vec<usize>, usize)]) {
    if dims.is_empty() {
        return;
    }
    for _ in 0..DEMEAN_MAX_SWEEPS {
        let mut max_mean = 0.0_f64;
        for (groups, n_groups) in dims {
            for col in columns.iter_mut() {
                let mut sums = vec![0.0; *n_groups];
                let mut counts = vec![0usize; *n_groups];
                for (i, v) in col.iter().enumerate() {
                    sums[groups[i]] += v;
                    counts[groups[i]] += 1;
                }
                for g in 0..*n_groups {
                    if counts[g] > 0 {
                        sums[g] /= counts[g] as f64;
                        max_mean = max_mean.max(libm::fabs(sums[g]));
                    }
                }
                for (i, v) in col.iter_mut().enumerate() {
                    *v -= sums[groups[i]];
                }
            }
        }
        if max_mean < DEMEAN_TOL {
            break;
        }
    }
}

/// Cluster-robust covariance by the sandwich
/// `(X'X)^-1 (sum_g X_g' e_g e_g' X_g) (X'X)^-1`, scaled by the CR1 factor
/// `G/(G-1) * (N-1)/(N-K)`. Returns the standard errors.
pub fn cluster_se(
    columns: &[Vec<f64>],
    residuals: &[f64],
    xtx_inv: &Mat,
    clusters: &[usize],
    n_clusters: usize,
    k_params: usize,
) -> Vec<f64> {
    let p = columns.len();
    let n = residuals.len();
    // Per-cluster score sums s_g = X_g' e_g.
    let mut scores = vec![vec![0.0; p]; n_clusters];
    for i in 0..n {
        let g = clusters[i];
        for j in 0..p {
            scores[g][j] += columns[j][i] * residuals[i];
        }
    }
    let mut meat = Mat::zeros(p, p);
    for s in &scores {
        for a in 0..p {
            for b in 0..p {
                meat.add_to(a, b, s[a] * s[b]);
            }
        }
    }
    let g = n_clusters as f64;
    let nf = n as f64;
    let kf = k_params as f64;
    let correction = if g > 1.0 && nf > kf { g / (g - 1.0) * (nf - 1.0) / (nf - kf) } else { 1.0 };

    let mut se = vec![0.0; p];
    for j in 0..p {
        // (A * meat * A)_jj with A = xtx_inv.
        let mut v = 0.0;
        for a in 0..p {
            for b in 0..p {
                v += xtx_inv.get(j, a) * meat.get(a, b) * xtx_inv.get(b, j);
            }
        }
        se[j] = sqrt((v * correction).max(0.0));
    }
    se
}

/// Least squares with absorbed fixed effects and clustered errors.
///
/// `columns` are the named regressors (no constant; one is handled
/// internally). `fixed_effects` holds the group label of each observation
/// per absorbed dimension. Coefficients match explicit-dummy least squares;
/// the reported constant is the grand-mean constant and the R-squared is
/// computed against the raw outcome.
pub fn ols_fe(
    y: &[f64],
    columns: &[(String, Vec<f64>)],
    fixed_effects: &[Vec<i64>],
    cluster_ids: &[i64],
) -> Result<RegressionResult, EconError> {
    let n0 = y.len();
    if n0 == 0
        || cluster_ids.len() != n0
        || columns.iter().any(|(_, c)| c.len() != n0)
        || fixed_effects.iter().any(|d| d.len() != n0)
    {
        return Err(EconError::BadInput);
    }

    // Singleton cells cannot separate their own effect from the residual.
    let kept = if fixed_effects.is_empty() {
        (0..n0).collect::<Vec<_>>()
    } else {
        drop_singletons(fixed_effects, n0)
    };
    if kept.is_empty() {
        return Err(EconError::EmptyAfterSingletonDrop);
    }
    let n = kept.len();
    let dropped = n0 - n;

    let y_raw: Vec<f64> = kept.iter().map(|&i| y[i]).collect();
    let x_raw: Vec<Vec<f64>> = columns
        .iter()
        .map(|(_, c)| kept.iter().map(|&i| c[i]).collect())
        .collect();

    let dims: Vec<(Vec<usize>, usize)> = fixed_effects
        .iter()
        .map(|labels| {
            let sub: Vec<i64> = kept.iter().map(|&i| labels[i]).collect();
            dense_groups(&sub)
        })
        .collect();
    let fe_levels: Vec<usize> = dims.iter().map(|(_, k)| *k).collect();

    let with_const = fixed_effects.is_empty();
    let mut work: Vec<Vec<f64>> = Vec::with_capacity(x_raw.len() + 1);
    work.push(y_raw.clone());
    work.extend(x_raw.iter().cloned());
    absorb_fixed_effects(&mut work, &dims);
    let y_dm = work.remove(0);
    let mut x_dm = work;
    if with_const {
        x_dm.push(vec![1.0; n]);
    }
    let p = x_dm.len();

    let (xtx, xty) = normal_equations(&x_dm, &y_dm);
    let beta = crate::linalg::cholesky_solve(&xtx, &xty, 1e-10)
        .map_err(|_| EconError::RankDeficient)?;
    let xtx_inv = cholesky_inverse(&xtx, 1e-10).map_err(|_| EconError::RankDeficient)?;

    let mut residuals = vec![0.0; n];
    let mut rss = 0.0;
    for i in 0..n {
        let mut fit = 0.0;
        for j in 0..p {
            fit += x_dm[j][i] * beta[j];
        }
        residuals[i] = y_dm[i] - fit;
        rss += residuals[i] * residuals[i];
    }
    let y_mean = y_raw.iter().sum::<f64>() / n as f64;
    let tss: f64 = y_raw.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 0.0 };

    // Clusters on the kept sample.
    let sub_clusters: Vec<i64> = kept.iter().map(|&i| cluster_ids[i]).collect();
    let (clusters, n_clusters) = dense_groups(&sub_clusters);
    if n_clusters < 2 {
        return Err(EconError::SingleCluster);
    }

    // Parameters: regressors (and explicit constant), plus absorbed effects:
    // all levels of the first dimension, levels minus one for the rest.
    let absorbed: usize = fe_levels
        .iter()
        .enumerate()
        .map(|(d, &l)| if d == 0 { l } else { l.saturating_sub(1) })
        .sum();
    let k_params = p + absorbed;

    let se = cluster_se(&x_dm, &residuals, &xtx_inv, &clusters, n_clusters, k_params);

    // Grand-mean constant: the fit at the sample means of the raw columns.
    let (constant, constant_se, names, coefficients, std_errors) = if with_const {
        let c = beta[p - 1];
        let cse = se[p - 1];
        (
            c,
            Some(cse),
            columns.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
            beta[..p - 1].to_vec(),
            se[..p - 1].to_vec(),
        )
    } else {
        let mut c = y_mean;
        for (j, col) in x_raw.iter().enumerate() {
            let mean = col.iter().sum::<f64>() / n as f64;
            c -= mean * beta[j];
        }
        (
            c,
            None,
            columns.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
            beta,
            se,
        )
    };

    Ok(RegressionResult {
        names,
        coefficients,
        std_errors,
        constant,
        constant_se,
        r_squared,
        n_used: n,
        n_dropped_singletons: dropped,
        n_clusters,
        fe_levels,
    })
}

/// One observation of the regression panel: an action with its user, market
/// and hour labels, outcome spread, ability proxy, rate variation, and
/// dollar control.
#[derive(Clone, Copy, Debug)]
pub struct PanelRow {
    pub user: i64,
    pub dyad_group: i64,
    pub hour_group: i64,
    pub spread_pct: f64,
    pub ability: f64,
    pub rate_change_pct: f64,
    pub usd_equivalent: f64,
}

/// The user-level ability proxies.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AbilityProxy {
    MultiMarket,
    LogCurrencies,
    LogActions,
    Metaorder,
    Aggressive,
    Pc1,
}

impl AbilityProxy {
    pub const ALL: [AbilityProxy; 6] = [
        AbilityProxy::MultiMarket,
        AbilityProxy::LogCurrencies,
        AbilityProxy::LogActions,
        AbilityProxy::Metaorder,
        AbilityProxy::Aggressive,
        AbilityProxy::Pc1,
    ];

    pub const fn label(self) -> &'static str {
        match self {
            AbilityProxy::MultiMarket => "d_currencies",
            AbilityProxy::LogCurrencies => "log_currencies",
            AbilityProxy::LogActions => "log_actions",
            AbilityProxy::Metaorder => "d_metaorder",
            AbilityProxy::Aggressive => "d_aggressive",
            AbilityProxy::Pc1 => "pc1",
        }
    }

    pub fn value(self, profile: &UserProfile) -> f64 {
        let b = |x: bool| if x { 1.0 } else { 0.0 };
        match self {
            AbilityProxy::MultiMarket => b(profile.d_currencies),
            AbilityProxy::LogCurrencies => profile.log_currencies,
            AbilityProxy::LogActions => profile.log_actions,
            AbilityProxy::Metaorder => b(profile.d_metaorder),
            AbilityProxy::Aggressive => b(profile.d_aggressive),
            AbilityProxy::Pc1 => profile.pc1_score.unwrap_or(0.0),
        }
    }
}

impl core::str::FromStr for AbilityProxy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "d-currencies" | "d_currencies" | "multi-market" => Ok(AbilityProxy::MultiMarket),
            "log-currencies" | "log_currencies" => Ok(AbilityProxy::LogCurrencies),
            "log-actions" | "log_actions" => Ok(AbilityProxy::LogActions),
            "d-metaorder" | "d_metaorder" | "metaorder" => Ok(AbilityProxy::Metaorder),
            "d-aggressive" | "d_aggressive" | "aggressive" => Ok(AbilityProxy::Aggressive),
            "pc1" => Ok(AbilityProxy::Pc1),
            other => Err(String::from(other)),
        }
    }
}

/// Which regression family a run belongs to: the level effect of ability
/// (no user effects possible, ability is user-constant) or its interaction
/// with rate variation (user effects allowed).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegressionFamily {
    AbilityLevel,
    RateInteraction,
}

/// Full description of one regression run.
#[derive(Clone, Copy, Debug)]
pub struct RegressionSpec {
    pub family: RegressionFamily,
    pub outcome: FeeRegime,
    pub proxy: AbilityProxy,
    pub fe_hour: bool,
    pub fe_dyad: bool,
    pub fe_user: bool,
}

impl RegressionSpec {
    pub fn validate(&self) -> Result<(), EconError> {
        // A user-constant regressor cannot coexist with user effects.
        if self.family == RegressionFamily::AbilityLevel && self.fe_user {
            return Err(EconError::BadInput);
        }
        Ok(())
    }
}

/// The dollar control enters scaled by 1/10,000.
pub const USD_CONTROL_SCALE: f64 = 1.0 / 10_000.0;

/// Ability-level regression: spread on the user's ability proxy and the
/// scaled dollar control, with optional hour and dyad effects.
pub fn run_ability_regression(
    rows: &[PanelRow],
    proxy_label: &str,
    fe_hour: bool,
    fe_dyad: bool,
) -> Result<RegressionResult, EconError> {
    let y: Vec<f64> = rows.iter().map(|r| r.spread_pct).collect();
    let columns = vec![
        (String::from(proxy_label), rows.iter().map(|r| r.ability).collect()),
        (
            String::from("usd_equivalent"),
            rows.iter().map(|r| r.usd_equivalent * USD_CONTROL_SCALE).collect(),
        ),
    ];
    let mut fe: Vec<Vec<i64>> = Vec::new();
    if fe_hour {
        fe.push(rows.iter().map(|r| r.hour_group).collect());
    }
    if fe_dyad {
        fe.push(rows.iter().map(|r| r.dyad_group).collect());
    }
    let clusters: Vec<i64> = rows.iter().map(|r| r.user).collect();
    ols_fe(&y, &columns, &fe, &clusters)
}

/// Rate-interaction regression: spread on ability x rate variation, the
/// rate variation itself, and the scaled dollar control; optionally with
/// user, hour, and dyad effects (the ability main effect is absorbed by the
/// user effects and is never entered separately).
pub fn run_interaction_regression(
    rows: &[PanelRow],
    proxy_label: &str,
    with_fixed_effects: bool,
) -> Result<RegressionResult, EconError> {
    let y: Vec<f64> = rows.iter().map(|r| r.spread_pct).collect();
    let columns = vec![
        (
            alloc::format!("rate_change*{proxy_label}"),
            rows.iter().map(|r| r.rate_change_pct * r.ability).collect(),
        ),
        (String::from("rate_change"), rows.iter().map(|r| r.rate_change_pct).collect()),
        (
            String::from("usd_equivalent"),
            rows.iter().map(|r| r.usd_equivalent * USD_CONTROL_SCALE).collect(),
        ),
    ];
    let fe: Vec<Vec<i64>> = if with_fixed_effects {
        vec![
            rows.iter().map(|r| r.user).collect(),
            rows.iter().map(|r| r.hour_group).collect(),
            rows.iter().map(|r| r.dyad_group).collect(),
        ]
    } else {
        Vec::new()
    };
    let clusters: Vec<i64> = rows.iter().map(|r| r.user).collect();
    ols_fe(&y, &columns, &fe, &clusters)
}

/// Assemble the regression panel from priced actions and user profiles
/// under a spread regime. Actions without the required pricing outputs are
/// dropped (rate-excluded actions, missing rate variation, missing dollar
/// value).
pub fn assemble_panel(
    priced: &[PricedAction],
    profiles: &[UserProfile],
    proxy: AbilityProxy,
    regime: FeeRegime,
    need_rate_change: bool,
) -> Vec<PanelRow> {
    let by_user: BTreeMap<i64, &UserProfile> =
        profiles.iter().map(|p| (p.user_id, p)).collect();
    let mut dyad_ids: BTreeMap<crate::currency::Dyad, i64> = BTreeMap::new();
    let mut rows = Vec::new();
    for pa in priced {
        let Some(profile) = by_user.get(&pa.action.user_id) else { continue };
        let Some(spread) = pa.spread_for(regime) else { continue };
        let Some(usd) = pa.usd_equivalent else { continue };
        let rate_change = match (need_rate_change, pa.rate_change_pct) {
            (true, Some(rc)) => rc,
            (true, None) => continue,
            (false, rc) => rc.unwrap_or(0.0),
        };
        let next = dyad_ids.len() as i64;
        let dyad_group = *dyad_ids.entry(pa.action.dyad).or_insert(next);
        rows.push(PanelRow {
            user: pa.action.user_id,
            dyad_group,
            hour_group: pa.action.execution_hour.hour_index(),
            spread_pct: spread,
            ability: proxy.value(profile),
            rate_change_pct: rate_change,
            usd_equivalent: usd,
        });
    }
    rows
}

/// Run an ability-level regression straight from priced actions.
pub fn run_eq_ability(
    priced: &[PricedAction],
    profiles: &[UserProfile],
    spec: &RegressionSpec,
) -> Result<RegressionResult, EconError> {
    spec.validate()?;
    let rows = assemble_panel(priced, profiles, spec.proxy, spec.outcome, false);
    run_ability_regression(&rows, spec.proxy.label(), spec.fe_hour, spec.fe_dyad)
}

/// Run a rate-interaction regression straight from priced actions.
pub fn run_eq_interaction(
    priced: &[PricedAction],
    profiles: &[UserProfile],
    spec: &RegressionSpec,
) -> Result<RegressionResult, EconError> {
    let rows = assemble_panel(priced, profiles, spec.proxy, spec.outcome, true);
    run_interaction_regression(&rows, spec.proxy.label(), spec.fe_user)
}

/// One cell of the robustness grid.
#[derive(Clone, Debug)]
pub struct RobustnessCell {
    pub window: crate::matcher::MatchConfig,
    pub regime: FeeRegime,
    pub learning_filter: bool,
    pub result: Result<RegressionResult, EconError>,
}

/// Re-run the multi-market ability regression (hour and dyad effects, user
/// clusters) over a grid of matching windows, fee regimes, and the
/// learning-by-doing filter. Each cell restarts from the cleaned ledger:
/// matching, profiles, and pricing are all recomputed under the cell's
/// window. Per-cell failures are recorded in the cell; the suite continues.
pub fn robustness_suite(
    legs: &[crate::ledger::Leg],
    rates: &crate::pricing::RateTable,
    fee_model: Option<&crate::fees::FittedModel>,
    windows: &[crate::matcher::MatchConfig],
    regimes: &[FeeRegime],
    learning_flags: &[bool],
    learning_max_days: i64,
) -> Vec<RobustnessCell> {
    use crate::fees;
    use crate::matcher;
    use crate::pricing;
    use crate::profiles as prof;

    // Trailing volumes by trade id, for expected-fee predictions.
    let volumes = fees::rolling_volumes(legs);
    let vol_by_trade: BTreeMap<&str, f64> = legs
        .iter()
        .zip(volumes.iter())
        .map(|(l, v)| {
            use rust_decimal::prelude::ToPrimitive;
            (l.trade_id.as_str(), v.to_f64().unwrap_or(0.0))
        })
        .collect();

    let mut cells = Vec::new();
    for window in windows {
        let actions = matcher::match_ledger(legs, window);
        let metas = prof::detect_metaorders(
            &actions,
            &alloc::vec![0.0; actions.len()],
            &prof::MetaorderConfig::default(),
        );
        let flags = prof::classify_aggressive(&actions);
        let profiles = prof::build_profiles(&actions, &metas, &flags);

        let priced: Vec<PricedAction> = actions
            .iter()
            .filter_map(|action| {
                let expected = fee_model.map(|model| {
                    let vol = |leg: &crate::ledger::Leg| {
                        vol_by_trade.get(leg.trade_id.as_str()).copied().unwrap_or(0.0)
                    };
                    pricing::ExpectedFees {
                        buy_fraction: fees::predict_expected_fee(
                            vol(&action.buy),
                            action.buy.timestamp,
                            model,
                        ) / 100.0,
                        sell_fraction: fees::predict_expected_fee(
                            vol(&action.sell),
                            action.sell.timestamp,
                            model,
                        ) / 100.0,
                    }
                });
                pricing::price_action(action, rates, expected).ok()
            })
            .collect();

        for &learning in learning_flags {
            let (kept_priced, kept_profiles) = if learning {
                let kept_actions =
                    prof::learning_filter(&profiles, &actions, learning_max_days);
                let keep: alloc::collections::BTreeSet<(String, String)> = kept_actions
                    .iter()
                    .map(|a| (a.buy.trade_id.clone(), a.sell.trade_id.clone()))
                    .collect();
                let filtered: Vec<PricedAction> = priced
                    .iter()
                    .filter(|p| {
                        keep.contains(&(
                            p.action.buy.trade_id.clone(),
                            p.action.sell.trade_id.clone(),
                        ))
                    })
                    .cloned()
                    .collect();
                (filtered, profiles.clone())
            } else {
                (priced.clone(), profiles.clone())
            };

            for &regime in regimes {
                let result = if regime == FeeRegime::Expected && fee_model.is_none() {
                    Err(EconError::BadInput)
                } else {
                    let rows = assemble_panel(
                        &kept_priced,
                        &kept_profiles,
                        AbilityProxy::MultiMarket,
                        regime,
                        false,
                    );
                    run_ability_regression(
                        &rows,
                        AbilityProxy::MultiMarket.label(),
                        true,
                        true,
                    )
                };
                cells.push(RobustnessCell {
                    window: *window,
                    regime,
                    learning_filter: learning,
                    result,
                });
            }
        }
    }
    cells
}
