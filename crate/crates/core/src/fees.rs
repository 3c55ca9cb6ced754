//! Transaction-cost models: actual fee percentages, 720-hour rolling
//! volumes, the expected-fee OLS model, and the zero-fee logit.
//!
//! The fee schedule discounts on trailing 30-day (720-hour) volume, so every
//! observation carries the user's volume over the half-open window
//! `(t - 720h, t)`, excluding the instant itself. Fees are modeled on the
//! percentage scale: a value of 0.6 means 0.6% of the amount traded.

use core::fmt;

use alloc::vec;
use alloc::vec::Vec;

use hashbrown::{HashMap, HashSet};
use libm::{exp, fabs, log};
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

use crate::ledger::Leg;
use crate::linalg::{cholesky_inverse, cholesky_solve, normal_equations, Mat};
use crate::time::{Timestamp, SECS_PER_HOUR};

/// Trailing window length: 720 hours.
pub const ROLLING_WINDOW_SECS: i64 = 720 * SECS_PER_HOUR;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitError {
    /// The design matrix lost rank (a constant column, say).
    RankDeficientDesign,
    /// A logit coefficient diverged past the separation guard.
    Separation,
    /// The likelihood failed to converge within the iteration cap.
    NonConvergence,
    /// Not enough observations to fit the requested specification.
    TooFewObservations,
}

impl fmt::Display for FitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitError::RankDeficientDesign => f.write_str("design matrix is rank deficient"),
            FitError::Separation => f.write_str("logit coefficients diverged (separation)"),
            FitError::NonConvergence => f.write_str("solver did not converge"),
            FitError::TooFewObservations => f.write_str("too few observations"),
        }
    }
}

/// A fitted model: labeled coefficients with classical standard errors and
/// fit diagnostics.
#[derive(Clone, Debug)]
pub struct FittedModel {
    pub labels: Vec<&'static str>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// R-squared for least squares, McFadden pseudo R-squared for the logit.
    pub r_squared: f64,
    pub n_observations: usize,
    pub iterations: usize,
}

impl FittedModel {
    pub fn coefficient(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .map(|i| self.coefficients[i])
    }
}

/// Actual fee paid on a leg as a percentage of the amounts traded:
/// the bitcoin fee over bitcoins plus the fiat fee over fiat, times 100.
pub fn actual_fee_pct(leg: &Leg) -> Result<Decimal, FeePctError> {
    if leg.bitcoins <= Decimal::ZERO || leg.money <= Decimal::ZERO {
        return Err(FeePctError::DegenerateLeg);
    }
    Ok((leg.bitcoin_fee / leg.bitcoins + leg.money_fee / leg.money) * Decimal::ONE_HUNDRED)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeePctError {
    DegenerateLeg,
}

impl fmt::Display for FeePctError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("fee percentage undefined on zero amounts")
    }
}

/// Bitcoin volume a user traded in the open interval `(instant - 720h,
/// instant)`. The instant's own trades are excluded, so an order never
/// discounts itself; a trade exactly 720 hours earlier is outside the
/// window.
pub fn rolling_volume_720h(history: &[(Timestamp, Decimal)], instant: Timestamp) -> Decimal {
    let lo = instant.unix() - ROLLING_WINDOW_SECS;
    let hi = instant.unix();
    history
        .iter()
        .filter(|(t, _)| t.unix() > lo && t.unix() < hi)
        .map(|(_, v)| *v)
        .sum()
}

/// Per-leg observation for the expected-fee model.
#[derive(Clone, Copy, Debug)]
pub struct FeeObservation {
    /// Bitcoins traded by the user in the trailing 720 hours.
    pub volume_720h: f64,
    pub when: Timestamp,
    /// Fee paid, percent of the amount traded.
    pub fee_pct: f64,
}

/// Special days on which posted fees were suspended or halved.
pub fn is_special_day(ts: Timestamp) -> bool {
    let day = ts.day_floor();
    let in_range = |from: (i64, u32, u32), to: (i64, u32, u32)| {
        let lo = Timestamp::from_ymd_hms(from.0, from.1, from.2, 0, 0, 0).unwrap();
        let hi = Timestamp::from_ymd_hms(to.0, to.1, to.2, 0, 0, 0).unwrap();
        day >= lo && day <= hi
    };
    in_range((2011, 12, 26), (2012, 1, 1))
        || in_range((2012, 4, 2), (2012, 4, 7))
        || in_range((2012, 11, 9), (2012, 11, 10))
}

fn in_day_range(ts: Timestamp, from: (i64, u32, u32), to: (i64, u32, u32)) -> bool {
    let day = ts.day_floor();
    let lo = Timestamp::from_ymd_hms(from.0, from.1, from.2, 0, 0, 0).unwrap();
    let hi = Timestamp::from_ymd_hms(to.0, to.1, to.2, 0, 0, 0).unwrap();
    day >= lo && day <= hi
}

/// Flat-fee era before volume discounts applied.
pub fn in_flat_065_window(ts: Timestamp) -> bool {
    in_day_range(ts, (2011, 4, 1), (2011, 6, 23))
}

/// Flat-fee era at 0.3%.
pub fn in_flat_03_window(ts: Timestamp) -> bool {
    in_day_range(ts, (2011, 6, 24), (2011, 8, 18))
}

/// The regressors of the expected-fee model, from trailing volume and date.
///
/// `log_vol` is the natural log of the trailing volume, floored at one
/// bitcoin so that an empty history maps to zero rather than minus infinity.
#[derive(Clone, Copy, Debug)]
pub struct FeeFeatures {
    pub log_vol: f64,
    pub vol_small: bool,
    pub vol_big: bool,
    pub era_flat_high: bool,
    pub era_flat_low: bool,
    pub special_day: bool,
}

impl FeeFeatures {
    pub fn build(volume_720h: f64, when: Timestamp) -> Self {
        FeeFeatures {
            log_vol: log(volume_720h.max(1.0)),
            vol_small: (100.0..10_000.0).contains(&volume_720h),
            vol_big: volume_720h >= 10_000.0,
            era_flat_high: in_flat_065_window(when),
            era_flat_low: in_flat_03_window(when),
            special_day: is_special_day(when),
        }
    }
}

/// The five nested specifications of the expected-fee model. Specification 5
/// is the full model and the default everywhere downstream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeeSpec(pub u8);

impl FeeSpec {
    pub const FULL: FeeSpec = FeeSpec(5);

    fn columns(self) -> Vec<&'static str> {
        let mut cols = vec!["intercept"];
        match self.0 {
            1 => cols.push("log_vol"),
            2 => cols.extend(["log_vol", "era_flat_high", "era_flat_low", "special_day"]),
            3 => cols.extend(["vol_small", "vol_big"]),
            4 => cols.extend([
                "log_vol",
                "vol_small",
                "vol_big",
                "log_vol*vol_small",
                "log_vol*vol_big",
            ]),
            _ => cols.extend([
                "log_vol",
                "vol_small",
                "vol_big",
                "log_vol*vol_small",
                "log_vol*vol_big",
                "era_flat_high",
                "era_flat_low",
                "special_day",
            ]),
        }
        cols
    }
}

fn fee_design_value(label: &str, f: &FeeFeatures) -> f64 {
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    match label {
        "intercept" => 1.0,
        "log_vol" => f.log_vol,
        "vol_small" => b(f.vol_small),
        "vol_big" => b(f.vol_big),
        "log_vol*vol_small" => f.log_vol * b(f.vol_small),
        "log_vol*vol_big" => f.log_vol * b(f.vol_big),
        "era_flat_high" => b(f.era_flat_high),
        "era_flat_low" => b(f.era_flat_low),
        "special_day" => b(f.special_day),
        _ => 0.0,
    }
}

/// Linear-volume variant of the fee design (kept for comparison; the
/// logarithmic model is the default and outperforms it).
fn fee_design_value_linear(label: &str, vol: f64, f: &FeeFeatures) -> f64 {
    match label {
        "log_vol" => vol,
        "log_vol*vol_small" => vol * if f.vol_small { 1.0 } else { 0.0 },
        "log_vol*vol_big" => vol * if f.vol_big { 1.0 } else { 0.0 },
        other => fee_design_value(other, f),
    }
}

/// Fit the expected-fee model by least squares on the legs with positive
/// fees below one percent. `linear_volume` swaps the log-volume terms for
/// raw volumes (non-default).
pub fn fit_fee_ols(
    observations: &[FeeObservation],
    spec: FeeSpec,
    linear_volume: bool,
) -> Result<FittedModel, FitError> {
    let sample: Vec<&FeeObservation> = observations
        .iter()
        .filter(|o| o.fee_pct > 0.0 && o.fee_pct < 1.0)
        .collect();
    let labels = spec.columns();
    if sample.len() <= labels.len() {
        return Err(FitError::TooFewObservations);
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(sample.len()); labels.len()];
    let mut y: Vec<f64> = Vec::with_capacity(sample.len());
    for obs in &sample {
        let features = FeeFeatures::build(obs.volume_720h, obs.when);
        for (j, label) in labels.iter().enumerate() {
            let v = if linear_volume {
                fee_design_value_linear(label, obs.volume_720h, &features)
            } else {
                fee_design_value(label, &features)
            };
            columns[j].push(v);
        }
        y.push(obs.fee_pct);
    }

    let (xtx, xty) = normal_equations(&columns, &y);
    let beta = cholesky_solve(&xtx, &xty, 1e-12).map_err(|_| FitError::RankDeficientDesign)?;
    let inv = cholesky_inverse(&xtx, 1e-12).map_err(|_| FitError::RankDeficientDesign)?;

    let n = y.len();
    let p = labels.len();
    let mut rss = 0.0;
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut tss = 0.0;
    for i in 0..n {
        let mut fit = 0.0;
        for j in 0..p {
            fit += columns[j][i] * beta[j];
        }
        rss += (y[i] - fit) * (y[i] - fit);
        tss += (y[i] - y_mean) * (y[i] - y_mean);
    }
    let sigma2 = rss / (n - p) as f64;
    let std_errors = (0..p).map(|j| libm::sqrt(sigma2 * inv.get(j, j))).collect();

    Ok(FittedModel {
        labels,
        coefficients: beta,
        std_errors,
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 0.0 },
        n_observations: n,
        iterations: 1,
    })
}

/// Predict the expected fee percentage for a leg from its trailing volume
/// and execution time, clamped at zero from below.
pub fn predict_expected_fee(volume_720h: f64, when: Timestamp, model: &FittedModel) -> f64 {
    let features = FeeFeatures::build(volume_720h, when);
    let mut fee = 0.0;
    for (label, beta) in model.labels.iter().zip(model.coefficients.iter()) {
        fee += beta * fee_design_value(label, &features);
    }
    fee.max(0.0)
}

/// Per-leg observation for the zero-fee logit.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroFeeObservation {
    pub log_vol: f64,
    pub bitcoins: f64,
    /// Day index of the trade (days since the epoch).
    pub date_index: f64,
    pub anomalous_day: bool,
    pub early_adopter: bool,
    pub anomalous_user: bool,
    /// The complementary leg was executed by an anomalous user.
    pub matcher: bool,
    pub markus: bool,
    pub willy: bool,
    /// Outcome: the leg paid a positive fee.
    pub fee_positive: bool,
}

/// The five nested specifications of the zero-fee logit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LogitSpec(pub u8);

impl LogitSpec {
    pub const FULL: LogitSpec = LogitSpec(5);

    fn columns(self) -> Vec<&'static str> {
        let mut cols = vec!["intercept"];
        match self.0 {
            1 => cols.push("log_vol"),
            2 => cols.extend(["log_vol", "bitcoins", "date"]),
            3 => cols.extend(["date", "anomalous_days"]),
            4 => cols.extend([
                "early_adopters",
                "anomalous_users",
                "matchers",
                "markus",
                "willy",
            ]),
            _ => cols.extend([
                "log_vol",
                "bitcoins",
                "date",
                "anomalous_days",
                "early_adopters",
                "anomalous_users",
                "matchers",
                "markus",
                "willy",
            ]),
        }
        cols
    }
}

fn logit_design_value(label: &str, o: &ZeroFeeObservation) -> f64 {
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    match label {
        "intercept" => 1.0,
        "log_vol" => o.log_vol,
        "bitcoins" => o.bitcoins,
        "date" => o.date_index,
        "anomalous_days" => b(o.anomalous_day),
        "early_adopters" => b(o.early_adopter),
        "anomalous_users" => b(o.anomalous_user),
        "matchers" => b(o.matcher),
        "markus" => b(o.markus),
        "willy" => b(o.willy),
        _ => 0.0,
    }
}

const LOGIT_MAX_ITER: usize = 100;
const LOGIT_LL_TOL: f64 = 1e-10;
const SEPARATION_BOUND: f64 = 50.0;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + exp(-z))
    } else {
        let e = exp(z);
        e / (1.0 + e)
    }
}

fn log_likelihood(y: &[f64], eta: &[f64]) -> f64 {
    let mut ll = 0.0;
    for i in 0..y.len() {
        let z = eta[i];
        // log(sigma(z)) computed stably for either sign.
        let log_p = if z >= 0.0 { -log(1.0 + exp(-z)) } else { z - log(1.0 + exp(z)) };
        let log_q = if z >= 0.0 { -z - log(1.0 + exp(-z)) } else { -log(1.0 + exp(z)) };
        ll += y[i] * log_p + (1.0 - y[i]) * log_q;
    }
    ll
}

/// Maximum-likelihood logistic regression via iteratively reweighted least
/// squares. Outcome: 1 when the leg paid a positive fee. Converges when the
/// log-likelihood improves by less than 1e-10; coefficients past |50| are
/// flagged as separation.
pub fn fit_zero_fee_logit(
    observations: &[ZeroFeeObservation],
    spec: LogitSpec,
) -> Result<FittedModel, FitError> {
    let labels = spec.columns();
    let n = observations.len();
    let p = labels.len();
    if n <= p {
        return Err(FitError::TooFewObservations);
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n); p];
    let mut y: Vec<f64> = Vec::with_capacity(n);
    for obs in observations {
        for (j, label) in labels.iter().enumerate() {
            columns[j].push(logit_design_value(label, obs));
        }
        y.push(if obs.fee_positive { 1.0 } else { 0.0 });
    }

    let mut beta = vec![0.0; p];
    let mut eta = vec![0.0; n];
    let mut ll_prev = log_likelihood(&y, &eta);
    let ll_null = ll_prev; // beta = 0 gives p = 1/2; the null uses the mean below.
    let mut iterations = 0;
    let mut converged = false;

    while iterations < LOGIT_MAX_ITER {
        iterations += 1;
        // Newton step: solve (X'WX) d = X'(y - p).
        let mut xtwx = Mat::zeros(p, p);
        let mut score = vec![0.0; p];
        for i in 0..n {
            let pi = sigmoid(eta[i]);
            let w = (pi * (1.0 - pi)).max(1e-12);
            let r = y[i] - pi;
            for a in 0..p {
                let xa = columns[a][i];
                score[a] += xa * r;
                for b in a..p {
                    xtwx.add_to(a, b, xa * columns[b][i] * w);
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                let v = xtwx.get(b, a);
                xtwx.set(a, b, v);
            }
        }
        let delta =
            cholesky_solve(&xtwx, &score, 1e-14).map_err(|_| FitError::RankDeficientDesign)?;
        for j in 0..p {
            beta[j] += delta[j];
        }
        if beta.iter().any(|b| fabs(*b) > SEPARATION_BOUND) {
            return Err(FitError::Separation);
        }
        for i in 0..n {
            let mut z = 0.0;
            for j in 0..p {
                z += columns[j][i] * beta[j];
            }
            eta[i] = z;
        }
        let ll = log_likelihood(&y, &eta);
        if fabs(ll - ll_prev) < LOGIT_LL_TOL {
            ll_prev = ll;
            converged = true;
            break;
        }
        ll_prev = ll;
    }
    if !converged {
        return Err(FitError::NonConvergence);
    }

    // Standard errors from the observed information at the optimum.
    let mut xtwx = Mat::zeros(p, p);
    for i in 0..n {
        let pi = sigmoid(eta[i]);
        let w = (pi * (1.0 - pi)).max(1e-12);
        for a in 0..p {
            for b in a..p {
                xtwx.add_to(a, b, columns[a][i] * columns[b][i] * w);
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            let v = xtwx.get(b, a);
            xtwx.set(a, b, v);
        }
    }
    let inv = cholesky_inverse(&xtwx, 1e-14).map_err(|_| FitError::RankDeficientDesign)?;
    let std_errors = (0..p).map(|j| libm::sqrt(inv.get(j, j))).collect();

    // McFadden pseudo R-squared against the intercept-only likelihood.
    let share = y.iter().sum::<f64>() / n as f64;
    let ll_base = if share > 0.0 && share < 1.0 {
        n as f64 * (share * log(share) + (1.0 - share) * log(1.0 - share))
    } else {
        ll_null
    };
    let pseudo_r2 = if ll_base != 0.0 { 1.0 - ll_prev / ll_base } else { 0.0 };

    Ok(FittedModel {
        labels,
        coefficients: beta,
        std_errors,
        r_squared: pseudo_r2,
        n_observations: n,
        iterations,
    })
}

/// Score (gradient of the log-likelihood) of a logit at given coefficients.
/// Exposed so tests can validate it against finite differences.
pub fn logit_score(
    observations: &[ZeroFeeObservation],
    spec: LogitSpec,
    beta: &[f64],
) -> Vec<f64> {
    let labels = spec.columns();
    let mut score = vec![0.0; labels.len()];
    for obs in observations {
        let mut z = 0.0;
        for (j, label) in labels.iter().enumerate() {
            z += logit_design_value(label, obs) * beta[j];
        }
        let r = (if obs.fee_positive { 1.0 } else { 0.0 }) - sigmoid(z);
        for (j, label) in labels.iter().enumerate() {
            score[j] += logit_design_value(label, obs) * r;
        }
    }
    score
}

/// Log-likelihood of a logit at given coefficients, for finite differences.
pub fn logit_log_likelihood(
    observations: &[ZeroFeeObservation],
    spec: LogitSpec,
    beta: &[f64],
) -> f64 {
    let labels = spec.columns();
    let mut eta = Vec::with_capacity(observations.len());
    let mut y = Vec::with_capacity(observations.len());
    for obs in observations {
        let mut z = 0.0;
        for (j, label) in labels.iter().enumerate() {
            z += logit_design_value(label, obs) * beta[j];
        }
        eta.push(z);
        y.push(if obs.fee_positive { 1.0 } else { 0.0 });
    }
    log_likelihood(&y, &eta)
}

/// Configuration lists for the zero-fee dataset: the identifier groups are
/// not derivable from the data and arrive as configuration.
#[derive(Clone, Debug, Default)]
pub struct ZeroFeeLists {
    pub anomalous_days: Vec<Timestamp>,
    pub anomalous_users: Vec<i64>,
    pub early_adopter_max_id: i64,
    pub markus_id: i64,
    pub willy_id: i64,
}

impl ZeroFeeLists {
    pub fn standard() -> Self {
        ZeroFeeLists {
            anomalous_days: Vec::new(),
            anomalous_users: Vec::new(),
            early_adopter_max_id: 16_000,
            markus_id: 635,
            willy_id: 1_000_000,
        }
    }
}

/// Build the expected-fee observations for every leg: trailing volumes are
/// accumulated per user with exact arithmetic over a two-pointer window.
pub fn build_fee_observations(legs: &[Leg]) -> Vec<FeeObservation> {
    let volumes = rolling_volumes(legs);
    legs.iter()
        .zip(volumes)
        .filter_map(|(leg, vol)| {
            let fee = actual_fee_pct(leg).ok()?;
            Some(FeeObservation {
                volume_720h: vol.to_f64().unwrap_or(0.0),
                when: leg.timestamp,
                fee_pct: fee.to_f64().unwrap_or(0.0),
            })
        })
        .collect()
}

/// Trailing 720-hour volume for every leg, aligned with the input order.
pub fn rolling_volumes(legs: &[Leg]) -> Vec<Decimal> {
    let mut by_user: HashMap<i64, Vec<usize>> = HashMap::new();
    for (i, leg) in legs.iter().enumerate() {
        by_user.entry(leg.user_id).or_default().push(i);
    }
    let mut out = vec![Decimal::ZERO; legs.len()];
    for (_, mut indices) in by_user {
        indices.sort_by_key(|&i| (legs[i].timestamp, i));
        let mut lo = 0usize;
        let mut hi = 0usize;
        let mut sum = Decimal::ZERO;
        for &i in &indices {
            let t = legs[i].timestamp.unix();
            // Advance the inclusion pointer: strictly earlier trades enter.
            while hi < indices.len() && legs[indices[hi]].timestamp.unix() < t {
                sum += legs[indices[hi]].bitcoins;
                hi += 1;
            }
            // Expire trades at or beyond the window's trailing edge.
            while lo < hi && legs[indices[lo]].timestamp.unix() <= t - ROLLING_WINDOW_SECS {
                sum -= legs[indices[lo]].bitcoins;
                lo += 1;
            }
            out[i] = sum;
        }
    }
    out
}

/// Build zero-fee observations for every leg with positive amounts.
pub fn build_zero_fee_observations(legs: &[Leg], lists: &ZeroFeeLists) -> Vec<ZeroFeeObservation> {
    let volumes = rolling_volumes(legs);
    let anomalous: HashSet<i64> = lists.anomalous_users.iter().copied().collect();
    let anomalous_days: HashSet<i64> =
        lists.anomalous_days.iter().map(|d| d.day_index()).collect();

    // A leg is a "matcher" when its complementary leg in the same trade was
    // executed by an anomalous user.
    let mut trade_users: HashMap<&str, Vec<(i64, usize)>> = HashMap::new();
    for (i, leg) in legs.iter().enumerate() {
        trade_users.entry(leg.trade_id.as_str()).or_default().push((leg.user_id, i));
    }

    legs.iter()
        .enumerate()
        .filter(|(_, leg)| leg.bitcoins > Decimal::ZERO && leg.money > Decimal::ZERO)
        .map(|(i, leg)| {
            let fee = actual_fee_pct(leg).unwrap_or(Decimal::ZERO);
            let matcher = trade_users
                .get(leg.trade_id.as_str())
                .map(|users| {
                    users
                        .iter()
                        .any(|&(uid, idx)| idx != i && anomalous.contains(&uid))
                })
                .unwrap_or(false);
            ZeroFeeObservation {
                log_vol: log(volumes[i].to_f64().unwrap_or(0.0).max(1.0)),
                bitcoins: leg.bitcoins.to_f64().unwrap_or(0.0),
                date_index: leg.timestamp.day_index() as f64,
                anomalous_day: anomalous_days.contains(&leg.timestamp.day_index()),
                early_adopter: leg.user_id >= 0 && leg.user_id <= lists.early_adopter_max_id,
                anomalous_user: anomalous.contains(&leg.user_id),
                matcher,
                markus: leg.user_id == lists.markus_id,
                willy: leg.user_id == lists.willy_id,
                fee_positive: fee > Decimal::ZERO,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::Rng;
    use alloc::vec;

    fn ts(s: &str) -> Timestamp {
        Timestamp::parse(s).unwrap()
    }

    #[test]
    fn fee_pct_sums_both_ratios() {
        let mut leg = crate::synth::tests_support::blank_leg();
        leg.bitcoins = "10".parse().unwrap();
        leg.money = "130".parse().unwrap();
        leg.bitcoin_fee = "0.06".parse().unwrap();
        assert_eq!(actual_fee_pct(&leg).unwrap(), "0.6".parse().unwrap());
        leg.bitcoin_fee = "0.03".parse().unwrap();
        leg.money_fee = "0.39".parse().unwrap();
        assert_eq!(actual_fee_pct(&leg).unwrap(), "0.6".parse().unwrap());
        leg.bitcoin_fee = Decimal::ZERO;
        leg.money_fee = Decimal::ZERO;
        assert_eq!(actual_fee_pct(&leg).unwrap(), Decimal::ZERO);
        leg.bitcoins = Decimal::ZERO;
        assert!(matches!(actual_fee_pct(&leg), Err(FeePctError::DegenerateLeg)));
    }

    #[test]
    fn rolling_window_is_open_on_both_ends() {
        let history = vec![
            (ts("2012-01-01 00:00:00"), Decimal::from(5)),
            (ts("2012-01-15 00:00:00"), Decimal::from(3)),
            (ts("2012-01-31 00:00:00"), Decimal::from(7)),
        ];
        // 2012-01-31 00:00:00 minus 720h is exactly 2012-01-01 00:00:00:
        // the first trade sits on the boundary and is excluded, as is the
        // instant's own trade.
        let vol = rolling_volume_720h(&history, ts("2012-01-31 00:00:00"));
        assert_eq!(vol, Decimal::from(3));
        let none = rolling_volume_720h(&history, ts("2012-01-01 00:00:00"));
        assert_eq!(none, Decimal::ZERO);
    }

    #[test]
    fn inserting_a_trade_shifts_only_the_following_window() {
        // Additivity: a trade at time t changes queries only in (t, t+720h].
        let mut history = vec![
            (ts("2012-01-05 00:00:00"), Decimal::from(2)),
            (ts("2012-02-20 00:00:00"), Decimal::from(4)),
            (ts("2012-04-10 00:00:00"), Decimal::from(8)),
        ];
        let inserted_at = ts("2012-02-01 12:00:00");
        let probes: Vec<Timestamp> = (0..120)
            .map(|d| Timestamp::from_unix(ts("2012-01-01 00:00:00").unix() + d * 86_400 + 1))
            .collect();
        let before: Vec<Decimal> =
            probes.iter().map(|&p| rolling_volume_720h(&history, p)).collect();
        history.push((inserted_at, Decimal::from(16)));
        history.sort_by_key(|&(t, _)| t);
        for (probe, old) in probes.iter().zip(before.iter()) {
            let new = rolling_volume_720h(&history, *probe);
            let affected = probe.unix() > inserted_at.unix()
                && probe.unix() <= inserted_at.unix() + ROLLING_WINDOW_SECS;
            if affected {
                assert_eq!(new, *old + Decimal::from(16), "probe {probe}");
            } else {
                assert_eq!(new, *old, "probe {probe}");
            }
        }
    }

    #[test]
    fn rolling_volumes_match_quadratic_scan() {
        let mut rng = Rng::new(99);
        let mut legs = Vec::new();
        let base = ts("2012-01-01 00:00:00").unix();
        for i in 0..300 {
            let mut leg = crate::synth::tests_support::blank_leg();
            leg.trade_id = alloc::format!("{i}");
            leg.user_id = (rng.next_u64() % 5) as i64;
            leg.timestamp = Timestamp::from_unix(base + (rng.next_u64() % 8_000_000) as i64);
            leg.bitcoins = Decimal::new((rng.next_u64() % 100_000) as i64, 4);
            legs.push(leg);
        }
        let fast = rolling_volumes(&legs);
        for (i, leg) in legs.iter().enumerate() {
            let history: Vec<(Timestamp, Decimal)> = legs
                .iter()
                .enumerate()
                .filter(|(j, l)| *j != i && l.user_id == leg.user_id)
                .map(|(_, l)| (l.timestamp, l.bitcoins))
                .collect();
            let slow = rolling_volume_720h(&history, leg.timestamp);
            assert_eq!(fast[i], slow, "leg {i}");
        }
    }

    fn synth_fee_data(n: usize, beta: &[f64; 9], sigma: f64, seed: u64) -> Vec<FeeObservation> {
        let mut rng = Rng::new(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            // Volumes spread log-uniformly across the bands; dates across eras.
            let volume = exp(rng.f64_unit() * log(1.0e6));
            let day_offset = (rng.next_u64() % 900) as i64;
            let when = Timestamp::from_unix(
                ts("2011-04-01 00:00:00").unix() + day_offset * 86_400 + 3_600,
            );
            let f = FeeFeatures::build(volume, when);
            let design = [
                1.0,
                f.log_vol,
                if f.vol_small { 1.0 } else { 0.0 },
                if f.vol_big { 1.0 } else { 0.0 },
                f.log_vol * if f.vol_small { 1.0 } else { 0.0 },
                f.log_vol * if f.vol_big { 1.0 } else { 0.0 },
                if f.era_flat_high { 1.0 } else { 0.0 },
                if f.era_flat_low { 1.0 } else { 0.0 },
                if f.special_day { 1.0 } else { 0.0 },
            ];
            let mut fee = 0.0;
            for j in 0..9 {
                fee += design[j] * beta[j];
            }
            fee += sigma * rng.normal();
            out.push(FeeObservation { volume_720h: volume, when, fee_pct: fee.clamp(0.001, 0.999) });
        }
        out
    }

    const TRUE_BETA: [f64; 9] =
        [0.561, -0.001, 0.152, -0.212, -0.037, -0.006, 0.158, -0.170, -0.191];

    #[test]
    fn fee_ols_recovers_known_coefficients() {
        let data = synth_fee_data(20_000, &TRUE_BETA, 1e-6, 7);
        let model = fit_fee_ols(&data, FeeSpec::FULL, false).unwrap();
        for (j, label) in model.labels.iter().enumerate() {
            assert!(
                fabs(model.coefficients[j] - TRUE_BETA[j]) < 1e-4,
                "{label}: {} vs {}",
                model.coefficients[j],
                TRUE_BETA[j]
            );
        }
        assert!(model.r_squared > 0.99);
    }

    #[test]
    fn constant_column_is_rank_deficient() {
        // All observations in the same band and era: vol_small is all-zero.
        let mut data = Vec::new();
        for i in 0..50 {
            data.push(FeeObservation {
                volume_720h: 10.0 + i as f64 * 0.1,
                when: ts("2012-06-01 00:00:00"),
                fee_pct: 0.6,
            });
        }
        assert!(matches!(
            fit_fee_ols(&data, FeeSpec::FULL, false),
            Err(FitError::RankDeficientDesign)
        ));
    }

    #[test]
    fn residuals_orthogonal_to_design() {
        let data = synth_fee_data(2_000, &TRUE_BETA, 1e-3, 11);
        let model = fit_fee_ols(&data, FeeSpec::FULL, false).unwrap();
        let sample: Vec<&FeeObservation> =
            data.iter().filter(|o| o.fee_pct > 0.0 && o.fee_pct < 1.0).collect();
        let mut dot = vec![0.0; model.labels.len()];
        for obs in sample {
            let f = FeeFeatures::build(obs.volume_720h, obs.when);
            let mut fit = 0.0;
            for (j, label) in model.labels.iter().enumerate() {
                fit += fee_design_value(label, &f) * model.coefficients[j];
            }
            let r = obs.fee_pct - fit;
            for (j, label) in model.labels.iter().enumerate() {
                dot[j] += fee_design_value(label, &f) * r;
            }
        }
        for (j, label) in model.labels.iter().enumerate() {
            assert!(fabs(dot[j]) < 1e-8, "{label}: {}", dot[j]);
        }
    }

    #[test]
    fn prediction_matches_plugin_arithmetic() {
        let model = FittedModel {
            labels: FeeSpec::FULL.columns(),
            coefficients: TRUE_BETA.to_vec(),
            std_errors: vec![0.0; 9],
            r_squared: 0.0,
            n_observations: 0,
            iterations: 1,
        };
        // 50 bitcoins, normal era: intercept + log_vol * ln(50).
        let fee = predict_expected_fee(50.0, ts("2012-06-15 12:00:00"), &model);
        assert!(fabs(fee - (0.561 - 0.001 * log(50.0))) < 1e-12);
        // Special day lowers the prediction by 0.191.
        let holiday = predict_expected_fee(50.0, ts("2011-12-27 12:00:00"), &model);
        assert!(fabs((fee - holiday) - 0.191) < 1e-12);
        // A wildly negative projection clamps to zero.
        let steep = FittedModel {
            labels: vec!["intercept", "log_vol"],
            coefficients: vec![0.1, -1.0],
            std_errors: vec![0.0; 2],
            r_squared: 0.0,
            n_observations: 0,
            iterations: 1,
        };
        assert_eq!(predict_expected_fee(1.0e6, ts("2012-06-15 12:00:00"), &steep), 0.0);
    }

    #[test]
    fn prediction_monotone_in_volume_when_slope_negative() {
        let data = synth_fee_data(20_000, &TRUE_BETA, 1e-5, 13);
        let model = fit_fee_ols(&data, FeeSpec::FULL, false).unwrap();
        // Within each band the volume slope is negative, so predictions fall
        // as volume grows inside the band.
        let when = ts("2012-06-15 12:00:00");
        for band in [(1.5, 90.0), (110.0, 9_000.0), (11_000.0, 1.0e6)] {
            let slope_lo = predict_expected_fee(band.0, when, &model);
            let slope_hi = predict_expected_fee(band.1, when, &model);
            assert!(slope_hi <= slope_lo + 1e-9, "band {band:?}");
        }
    }

    fn synth_logit_data(n: usize, beta0: f64, beta1: f64, seed: u64) -> Vec<ZeroFeeObservation> {
        let mut rng = Rng::new(seed);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let log_vol = rng.f64_unit() * 10.0;
            let z = beta0 + beta1 * log_vol;
            let p = sigmoid(z);
            out.push(ZeroFeeObservation {
                log_vol,
                fee_positive: rng.f64_unit() < p,
                ..ZeroFeeObservation::default()
            });
        }
        out
    }

    #[test]
    fn intercept_only_logit_on_balanced_outcome() {
        let mut data = Vec::new();
        for i in 0..1000 {
            data.push(ZeroFeeObservation { fee_positive: i % 2 == 0, ..Default::default() });
        }
        // Fit the log-vol spec; with log_vol identically zero the design is
        // collinear with the intercept, so use spec 1 on varying volumes but
        // an outcome independent of them.
        let mut rng = Rng::new(3);
        for obs in data.iter_mut() {
            obs.log_vol = rng.f64_unit();
        }
        let model = fit_zero_fee_logit(&data, LogitSpec(1)).unwrap();
        assert!(fabs(model.coefficients[0]) < 0.3);
    }

    #[test]
    fn logit_recovers_known_coefficients_within_two_se() {
        let data = synth_logit_data(50_000, 2.0, -0.4, 18);
        let model = fit_zero_fee_logit(&data, LogitSpec(1)).unwrap();
        let b0 = model.coefficients[0];
        let b1 = model.coefficients[1];
        assert!(fabs(b0 - 2.0) < 2.0 * model.std_errors[0], "{b0} +- {}", model.std_errors[0]);
        assert!(fabs(b1 + 0.4) < 2.0 * model.std_errors[1], "{b1} +- {}", model.std_errors[1]);
        assert!(model.r_squared > 0.0 && model.r_squared < 1.0);
    }

    #[test]
    fn logit_score_vanishes_at_optimum() {
        let data = synth_logit_data(5_000, 1.0, -0.25, 23);
        let model = fit_zero_fee_logit(&data, LogitSpec(1)).unwrap();
        let score = logit_score(&data, LogitSpec(1), &model.coefficients);
        for s in score {
            assert!(fabs(s) < 1e-6, "score component {s}");
        }
    }

    #[test]
    fn logit_score_matches_finite_differences() {
        let data = synth_logit_data(200, 0.5, -0.3, 29);
        let beta = vec![0.3, -0.1];
        let score = logit_score(&data, LogitSpec(1), &beta);
        let h = 1e-6;
        for j in 0..2 {
            let mut up = beta.clone();
            let mut down = beta.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (logit_log_likelihood(&data, LogitSpec(1), &up)
                - logit_log_likelihood(&data, LogitSpec(1), &down))
                / (2.0 * h);
            let rel = fabs(score[j] - fd) / fabs(fd).max(1e-12);
            assert!(rel < 1e-6, "component {j}: {} vs {}", score[j], fd);
        }
    }

    #[test]
    fn perfect_separation_is_flagged() {
        let mut data = Vec::new();
        for i in 0..200 {
            let log_vol = i as f64 / 10.0;
            data.push(ZeroFeeObservation {
                log_vol,
                fee_positive: log_vol > 10.0,
                ..Default::default()
            });
        }
        let result = fit_zero_fee_logit(&data, LogitSpec(1));
        assert!(matches!(result, Err(FitError::Separation) | Err(FitError::NonConvergence)));
    }

    #[test]
    fn special_day_calendar() {
        assert!(is_special_day(ts("2011-12-26 10:00:00")));
        assert!(is_special_day(ts("2012-01-01 23:59:59")));
        assert!(is_special_day(ts("2012-04-02 00:00:00")));
        assert!(is_special_day(ts("2012-11-10 12:00:00")));
        assert!(!is_special_day(ts("2012-01-02 00:00:00")));
        assert!(!is_special_day(ts("2012-11-11 00:00:00")));
        assert!(in_flat_065_window(ts("2011-06-23 23:00:00")));
        assert!(in_flat_03_window(ts("2011-06-24 00:00:00")));
        assert!(!in_flat_03_window(ts("2011-08-19 00:00:00")));
    }
}
