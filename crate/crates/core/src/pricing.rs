//! Official and implied exchange rates, spreads, and USD-equivalent volumes.
//!
//! Each action is priced against the hourly official rate oriented with the
//! buy-leg currency as the base. The implied rate compares the bitcoin
//! prices of the two legs; the fee-inclusive variant uses net-of-fee
//! receipts over gross-of-fee outlays on each side, so non-negative fees can
//! only lower it. Actions whose dyad has no official rate at their hour are
//! flagged excluded, never priced from invented data.

use core::fmt;

use alloc::collections::{BTreeMap, BTreeSet};

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

use crate::currency::{Currency, CurrencyPair, Dyad};
use crate::ledger::RateBar;
use crate::matcher::ArbitrageAction;
use crate::time::{Timestamp, SECS_PER_HOUR};

/// How explicit transaction costs enter the implied rate.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FeeRegime {
    /// Ignore fees entirely.
    NoFees,
    /// Use the fee amounts recorded on the legs.
    Actual,
    /// Use fees predicted by the fitted fee model.
    Expected,
}

impl FeeRegime {
    pub const fn as_str(self) -> &'static str {
        match self {
            FeeRegime::NoFees => "no-fees",
            FeeRegime::Actual => "actual",
            FeeRegime::Expected => "expected",
        }
    }
}

impl core::str::FromStr for FeeRegime {
    type Err = alloc::string::String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "no-fees" | "none" | "nofees" => Ok(FeeRegime::NoFees),
            "actual" | "fees" => Ok(FeeRegime::Actual),
            "expected" => Ok(FeeRegime::Expected),
            other => Err(alloc::string::String::from(other)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PriceError {
    /// A leg has a non-positive effective quantity in a denominator.
    DegenerateLeg,
    /// No official rate exists for the dyad at the required hour.
    MissingRate,
}

impl fmt::Display for PriceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriceError::DegenerateLeg => f.write_str("leg has a non-positive denominator"),
            PriceError::MissingRate => f.write_str("no official rate for dyad-hour"),
        }
    }
}

/// Hourly official rates indexed by oriented pair and hour.
///
/// Lookups fall back to the reciprocal of the opposite orientation, and to a
/// cross rate through USD -- but only when no file for the dyad (in either
/// orientation) was loaded at all.
pub struct RateTable {
    bars: BTreeMap<(CurrencyPair, i64), f64>,
    dyads_present: BTreeSet<Dyad>,
}

fn to_f64(d: Decimal) -> f64 {
    d.to_f64().unwrap_or(f64::NAN)
}

impl RateTable {
    pub fn new(bars: &[RateBar]) -> Self {
        let mut map = BTreeMap::new();
        let mut dyads = BTreeSet::new();
        for bar in bars {
            map.insert((bar.pair, bar.hour.hour_index()), to_f64(bar.open));
            dyads.insert(Dyad::new(bar.pair.base, bar.pair.quote));
        }
        RateTable { bars: map, dyads_present: dyads }
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    fn stored(&self, pair: CurrencyPair, hour: i64) -> Option<f64> {
        self.bars.get(&(pair, hour)).copied()
    }

    /// Rate from one currency to another at an hour: stored orientation,
    /// the reciprocal of the reverse, or a USD cross when the dyad has no
    /// file at all.
    pub fn rate(&self, base: Currency, quote: Currency, hour: Timestamp) -> Option<f64> {
        if base == quote {
            return Some(1.0);
        }
        let h = hour.hour_index();
        let pair = CurrencyPair::new(base, quote);
        if let Some(r) = self.stored(pair, h) {
            return Some(r);
        }
        if let Some(r) = self.stored(pair.reversed(), h) {
            return Some(1.0 / r);
        }
        if self.dyads_present.contains(&Dyad::new(base, quote)) {
            // The dyad is covered by a file; a missing hour stays missing.
            return None;
        }
        if base != Currency::Usd && quote != Currency::Usd {
            let leg1 = self.direct_or_reciprocal(base, Currency::Usd, h)?;
            let leg2 = self.direct_or_reciprocal(Currency::Usd, quote, h)?;
            return Some(leg1 * leg2);
        }
        None
    }

    fn direct_or_reciprocal(&self, base: Currency, quote: Currency, hour: i64) -> Option<f64> {
        let pair = CurrencyPair::new(base, quote);
        if let Some(r) = self.stored(pair, hour) {
            return Some(r);
        }
        self.stored(pair.reversed(), hour).map(|r| 1.0 / r)
    }
}

/// Official rate for an action: quote units of the sell-leg currency per one
/// unit of the buy-leg currency, at the action's execution hour.
pub fn official_rate(action: &ArbitrageAction, rates: &RateTable) -> Option<f64> {
    rates.rate(action.buy.currency, action.sell.currency, action.execution_hour)
}

/// Per-leg fee fractions (not percent) used by the expected-fee regime.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExpectedFees {
    pub buy_fraction: f64,
    pub sell_fraction: f64,
}

/// Implied exchange rate of an action under a fee regime.
///
/// Without fees: (Fiat_sell / BTC_sell) * (BTC_buy / Fiat_buy). With fees,
/// each side uses what the user effectively got and gave: the seller's
/// receipts net of the fiat fee over bitcoins surrendered gross of the
/// bitcoin fee, and the buyer's bitcoins net of the bitcoin fee over fiat
/// paid gross of the fiat fee. Non-negative fees therefore never raise the
/// implied rate. For the expected regime the recorded fees are replaced by
/// the model's predicted fraction of each leg's amounts.
pub fn implied_rate(
    action: &ArbitrageAction,
    regime: FeeRegime,
    expected: Option<ExpectedFees>,
) -> Result<f64, PriceError> {
    let buy = &action.buy;
    let sell = &action.sell;
    let (buy_fee_btc, buy_fee_fiat, sell_fee_fiat, sell_fee_btc) = match regime {
        FeeRegime::NoFees => (0.0, 0.0, 0.0, 0.0),
        FeeRegime::Actual => (
            to_f64(buy.bitcoin_fee),
            to_f64(buy.money_fee),
            to_f64(sell.money_fee),
            to_f64(sell.bitcoin_fee),
        ),
        FeeRegime::Expected => {
            let exp = expected.ok_or(PriceError::DegenerateLeg)?;
            // Buyers pay in bitcoins, sellers in fiat.
            (
                to_f64(buy.bitcoins) * exp.buy_fraction,
                0.0,
                to_f64(sell.money) * exp.sell_fraction,
                0.0,
            )
        }
    };

    let sell_num = to_f64(sell.money) - sell_fee_fiat;
    let sell_den = to_f64(sell.bitcoins) + sell_fee_btc;
    let buy_num = to_f64(buy.bitcoins) - buy_fee_btc;
    let buy_den = to_f64(buy.money) + buy_fee_fiat;
    if sell_den <= 0.0 || buy_den <= 0.0 || sell_num <= 0.0 || buy_num <= 0.0 {
        return Err(PriceError::DegenerateLeg);
    }
    Ok((sell_num / sell_den) * (buy_num / buy_den))
}

/// The fee-inclusive implied rate exactly as the definition table prints it,
/// with the buy-side fee terms on the opposite sides of the fraction. Kept
/// behind this separate entry point for comparison runs; the printed layout
/// contradicts the stated property that fees reduce margins.
pub fn implied_rate_printed_variant(action: &ArbitrageAction) -> Result<f64, PriceError> {
    let buy = &action.buy;
    let sell = &action.sell;
    let sell_num = to_f64(sell.money) - to_f64(sell.money_fee);
    let sell_den = to_f64(sell.bitcoins) + to_f64(sell.bitcoin_fee);
    let buy_num = to_f64(buy.bitcoins) + to_f64(buy.money_fee);
    let buy_den = to_f64(buy.money) - to_f64(buy.bitcoin_fee);
    if sell_den <= 0.0 || buy_den <= 0.0 {
        return Err(PriceError::DegenerateLeg);
    }
    Ok((sell_num / sell_den) * (buy_num / buy_den))
}

/// Percentage spread between an implied and an official rate.
pub fn spread_pct(implied: f64, official: f64) -> f64 {
    (implied - official) / official * 100.0
}

/// Spread of an action under a regime, or the pricing error that blocks it.
pub fn spread(
    action: &ArbitrageAction,
    regime: FeeRegime,
    expected: Option<ExpectedFees>,
    rates: &RateTable,
) -> Result<f64, PriceError> {
    let official = official_rate(action, rates).ok_or(PriceError::MissingRate)?;
    let implied = implied_rate(action, regime, expected)?;
    Ok(spread_pct(implied, official))
}

/// Absolute hour-over-hour percentage change of a dyad's official rate, on
/// the dyad's canonical orientation.
pub fn rate_change_pct(dyad: Dyad, hour: Timestamp, rates: &RateTable) -> Option<f64> {
    let now = rates.rate(dyad.first(), dyad.second(), hour)?;
    let prev_hour = Timestamp::from_unix(hour.hour_floor().unix() - SECS_PER_HOUR);
    let prev = rates.rate(dyad.first(), dyad.second(), prev_hour)?;
    Some(libm::fabs(now - prev) / prev * 100.0)
}

/// Value of an action expressed in dollars: the USD leg's fiat amount when
/// one side is in USD, otherwise the buy leg's fiat amount converted at the
/// hourly rate.
pub fn usd_equivalent(action: &ArbitrageAction, rates: &RateTable) -> Option<f64> {
    if action.buy.currency == Currency::Usd {
        return Some(to_f64(action.buy.money));
    }
    if action.sell.currency == Currency::Usd {
        return Some(to_f64(action.sell.money));
    }
    let rate = rates.rate(action.buy.currency, Currency::Usd, action.execution_hour)?;
    Some(to_f64(action.buy.money) * rate)
}

/// An action with every pricing output attached.
#[derive(Clone, Debug)]
pub struct PricedAction {
    pub action: ArbitrageAction,
    pub official_rate: Option<f64>,
    pub spread_no_fees_pct: Option<f64>,
    pub spread_actual_pct: Option<f64>,
    pub spread_expected_pct: Option<f64>,
    /// Hourly variation of the dyad's official rate, absolute percent.
    pub rate_change_pct: Option<f64>,
    pub usd_equivalent: Option<f64>,
    /// Set when no official rate exists for the dyad-hour. Such actions are
    /// excluded from rate-dependent analyses, never fabricated.
    pub excluded_missing_rate: bool,
}

impl PricedAction {
    pub fn spread_for(&self, regime: FeeRegime) -> Option<f64> {
        match regime {
            FeeRegime::NoFees => self.spread_no_fees_pct,
            FeeRegime::Actual => self.spread_actual_pct,
            FeeRegime::Expected => self.spread_expected_pct,
        }
    }
}

/// Price one action under all regimes at once. The expected-fee spread is
/// present only when predicted fees are supplied.
pub fn price_action(
    action: &ArbitrageAction,
    rates: &RateTable,
    expected: Option<ExpectedFees>,
) -> Result<PricedAction, PriceError> {
    let official = official_rate(action, rates);
    let excluded = official.is_none();
    let implied_free = implied_rate(action, FeeRegime::NoFees, None)?;
    let implied_actual = implied_rate(action, FeeRegime::Actual, None)?;
    let implied_expected = match expected {
        Some(exp) => Some(implied_rate(action, FeeRegime::Expected, Some(exp))?),
        None => None,
    };
    Ok(PricedAction {
        action: action.clone(),
        official_rate: official,
        spread_no_fees_pct: official.map(|o| spread_pct(implied_free, o)),
        spread_actual_pct: official.map(|o| spread_pct(implied_actual, o)),
        spread_expected_pct: match (implied_expected, official) {
            (Some(i), Some(o)) => Some(spread_pct(i, o)),
            _ => None,
        },
        rate_change_pct: rate_change_pct(action.dyad, action.execution_hour, rates),
        usd_equivalent: usd_equivalent(action, rates),
        excluded_missing_rate: excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{Leg, LegFlags, McKind, Side};
    use alloc::string::String;
    use alloc::vec;

    fn leg(side: Side, cur: Currency, btc: &str, money: &str) -> Leg {
        Leg {
            trade_id: String::from(if side == Side::Buy { "b" } else { "s" }),
            timestamp: Timestamp::parse("2012-10-27 14:20:00").unwrap(),
            user_id: 1,
            side,
            currency: cur,
            bitcoins: btc.parse().unwrap(),
            money: money.parse().unwrap(),
            money_jpy: "0".parse().unwrap(),
            money_fee: Decimal::ZERO,
            bitcoin_fee: Decimal::ZERO,
            money_rate: Decimal::ONE,
            money_fee_rate: Decimal::ONE,
            japan: Default::default(),
            user_country: None,
            user_state: None,
            mc_kind: McKind::Standard,
            merged_count: 1,
            order_kind: None,
            aggressive: None,
            flags: LegFlags::default(),
        }
    }

    fn action(buy: Leg, sell: Leg) -> ArbitrageAction {
        ArbitrageAction {
            user_id: 1,
            dyad: Dyad::new(buy.currency, sell.currency),
            time_delta_secs: 0,
            volume_delta_pct: Decimal::ZERO,
            execution_hour: buy.timestamp.hour_floor(),
            buy,
            sell,
        }
    }

    fn eurusd_table(open: &str) -> RateTable {
        let hour = Timestamp::parse("2012-10-27 14:00:00").unwrap();
        RateTable::new(&[RateBar {
            pair: CurrencyPair::new(Currency::Eur, Currency::Usd),
            hour,
            open: open.parse().unwrap(),
        }])
    }

    #[test]
    fn official_rate_oriented_by_buy_leg() {
        let rates = eurusd_table("1.400");
        let a = action(leg(Side::Buy, Currency::Eur, "1", "100"), leg(Side::Sell, Currency::Usd, "1", "141"));
        assert_eq!(official_rate(&a, &rates), Some(1.400));
        let b = action(leg(Side::Buy, Currency::Usd, "1", "141"), leg(Side::Sell, Currency::Eur, "1", "100"));
        let r = official_rate(&b, &rates).unwrap();
        assert!((r - 1.0 / 1.400).abs() < 1e-12);
    }

    #[test]
    fn reciprocal_product_is_one() {
        let rates = eurusd_table("1.400");
        let hour = Timestamp::parse("2012-10-27 14:30:00").unwrap();
        let ab = rates.rate(Currency::Eur, Currency::Usd, hour).unwrap();
        let ba = rates.rate(Currency::Usd, Currency::Eur, hour).unwrap();
        assert!((ab * ba - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_rate_via_usd_only_when_direct_absent() {
        let hour = Timestamp::parse("2012-10-27 14:00:00").unwrap();
        let bars = vec![
            RateBar {
                pair: CurrencyPair::new(Currency::Eur, Currency::Usd),
                hour,
                open: "1.400".parse().unwrap(),
            },
            RateBar {
                pair: CurrencyPair::new(Currency::Gbp, Currency::Usd),
                hour,
                open: "1.600".parse().unwrap(),
            },
        ];
        let rates = RateTable::new(&bars);
        // EUR -> GBP has no direct file: crossed through USD.
        let r = rates.rate(Currency::Eur, Currency::Gbp, hour).unwrap();
        assert!((r - 1.400 / 1.600).abs() < 1e-12);
        // CNY has no rates at all.
        assert_eq!(rates.rate(Currency::Cny, Currency::Usd, hour), None);
    }

    #[test]
    fn missing_rate_marks_excluded() {
        let rates = eurusd_table("1.400");
        let a = action(leg(Side::Buy, Currency::Cny, "1", "100"), leg(Side::Sell, Currency::Usd, "1", "141"));
        let priced = price_action(&a, &rates, None).unwrap();
        assert!(priced.excluded_missing_rate);
        assert_eq!(priced.spread_actual_pct, None);
        // The USD leg still gives a dollar value.
        assert_eq!(priced.usd_equivalent, Some(141.0));
    }

    #[test]
    fn implied_rate_hand_example() {
        // Buy 1 BTC for 100 EUR, sell 1 BTC for 141 USD: 1.41 USD per EUR.
        let a = action(leg(Side::Buy, Currency::Eur, "1", "100"), leg(Side::Sell, Currency::Usd, "1", "141"));
        let r = implied_rate(&a, FeeRegime::NoFees, None).unwrap();
        assert!((r - 1.41).abs() < 1e-12);
    }

    #[test]
    fn zero_fees_equal_no_fee_regime() {
        let a = action(leg(Side::Buy, Currency::Eur, "1", "100"), leg(Side::Sell, Currency::Usd, "1", "141"));
        let free = implied_rate(&a, FeeRegime::NoFees, None).unwrap();
        let actual = implied_rate(&a, FeeRegime::Actual, None).unwrap();
        assert_eq!(free, actual);
    }

    #[test]
    fn fees_reduce_the_implied_rate() {
        // 0.6% fees on both legs, paid in both units on each side.
        let mut buy = leg(Side::Buy, Currency::Eur, "1", "100");
        buy.bitcoin_fee = "0.006".parse().unwrap();
        buy.money_fee = "0.6".parse().unwrap();
        let mut sell = leg(Side::Sell, Currency::Usd, "1", "141");
        sell.bitcoin_fee = "0.006".parse().unwrap();
        sell.money_fee = "0.846".parse().unwrap();
        let a = action(buy, sell);
        let with_fees = implied_rate(&a, FeeRegime::Actual, None).unwrap();
        let expected = 1.41 * (0.994 / 1.006) * (0.994 / 1.006);
        assert!((with_fees - expected).abs() < 1e-12);
        assert!(with_fees < 1.41);
    }

    #[test]
    fn worked_spread_example() {
        // Implied 1.405 over official 1.400 is a +0.3571...% profit.
        let rates = eurusd_table("1.400");
        let a = action(leg(Side::Buy, Currency::Eur, "1", "100"), leg(Side::Sell, Currency::Usd, "1", "140.5"));
        let s = spread(&a, FeeRegime::NoFees, None, &rates).unwrap();
        assert!((s - (1.405 - 1.400) / 1.400 * 100.0).abs() < 1e-9);
        assert!(s > 0.0);
    }

    #[test]
    fn equal_rates_spread_zero() {
        assert_eq!(spread_pct(1.4, 1.4), 0.0);
    }

    #[test]
    fn spread_scale_invariant_without_fees() {
        let a = action(leg(Side::Buy, Currency::Eur, "2", "200"), leg(Side::Sell, Currency::Usd, "2", "281"));
        let b = action(leg(Side::Buy, Currency::Eur, "5", "500"), leg(Side::Sell, Currency::Usd, "5", "702.5"));
        let ra = implied_rate(&a, FeeRegime::NoFees, None).unwrap();
        let rb = implied_rate(&b, FeeRegime::NoFees, None).unwrap();
        assert!((ra - rb).abs() < 1e-12);
    }

    #[test]
    fn rate_variation_is_absolute() {
        let hour0 = Timestamp::parse("2012-10-27 13:00:00").unwrap();
        let hour1 = Timestamp::parse("2012-10-27 14:00:00").unwrap();
        let pair = CurrencyPair::new(Currency::Eur, Currency::Usd);
        let rates = RateTable::new(&[
            RateBar { pair, hour: hour0, open: "1.400".parse().unwrap() },
            RateBar { pair, hour: hour1, open: "1.414".parse().unwrap() },
        ]);
        let dyad = Dyad::new(Currency::Eur, Currency::Usd);
        let dr = rate_change_pct(dyad, hour1, &rates).unwrap();
        assert!((dr - 1.0).abs() < 1e-9);
        // Constant series has zero variation; missing previous hour is None.
        assert_eq!(rate_change_pct(dyad, hour0, &rates), None);
        let falling = RateTable::new(&[
            RateBar { pair, hour: hour0, open: "1.414".parse().unwrap() },
            RateBar { pair, hour: hour1, open: "1.400".parse().unwrap() },
        ]);
        assert!(rate_change_pct(dyad, hour1, &falling).unwrap() > 0.0);
    }

    #[test]
    fn usd_equiv_prefers_usd_leg_then_converts() {
        let rates = eurusd_table("1.400");
        let a = action(leg(Side::Buy, Currency::Eur, "1", "100"), leg(Side::Sell, Currency::Usd, "1", "141"));
        assert_eq!(usd_equivalent(&a, &rates), Some(141.0));
        let hour = Timestamp::parse("2012-10-27 14:00:00").unwrap();
        let bars = vec![
            RateBar {
                pair: CurrencyPair::new(Currency::Eur, Currency::Usd),
                hour,
                open: "1.4".parse().unwrap(),
            },
            RateBar {
                pair: CurrencyPair::new(Currency::Eur, Currency::Gbp),
                hour,
                open: "0.875".parse().unwrap(),
            },
        ];
        let cross = RateTable::new(&bars);
        let b = action(leg(Side::Buy, Currency::Eur, "1", "100"), leg(Side::Sell, Currency::Gbp, "1", "87"));
        let usd = usd_equivalent(&b, &cross).unwrap();
        assert!((usd - 140.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_leg_is_an_error() {
        let a = action(leg(Side::Buy, Currency::Eur, "1", "0"), leg(Side::Sell, Currency::Usd, "1", "141"));
        assert_eq!(implied_rate(&a, FeeRegime::NoFees, None), Err(PriceError::DegenerateLeg));
    }

    #[test]
    fn printed_variant_raises_rate_on_fee() {
        let mut buy = leg(Side::Buy, Currency::Eur, "1", "100");
        buy.money_fee = "0.6".parse().unwrap();
        let a = action(buy, leg(Side::Sell, Currency::Usd, "1", "141"));
        let printed = implied_rate_printed_variant(&a).unwrap();
        let oriented = implied_rate(&a, FeeRegime::Actual, None).unwrap();
        assert!(printed > oriented);
    }
}
