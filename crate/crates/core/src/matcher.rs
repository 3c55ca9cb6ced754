//! Detection of triangular arbitrage actions.
//!
//! An arbitrage action is a pair of opposite-side legs executed by the same
//! user in two separate trades and two different fiat currencies, nearly
//! simultaneous and nearly equal in bitcoin volume. Candidate pairs live in
//! a window of at most `max_time_delta_secs` seconds and
//! `max_volume_delta_pct` percent volume difference; each leg joins at most
//! one action, resolved greedily in chronological order with closest-in-time
//! preference.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rust_decimal::Decimal;

use crate::currency::Dyad;
use crate::ledger::{Leg, Side};
use crate::time::Timestamp;

/// Matching window: maximum time delay in seconds and maximum volume
/// difference in percent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchConfig {
    pub max_time_delta_secs: i64,
    pub max_volume_delta_pct: Decimal,
}

impl MatchConfig {
    pub fn new(max_time_delta_secs: i64, max_volume_delta_pct: Decimal) -> Self {
        assert!(max_time_delta_secs >= 0);
        assert!(max_volume_delta_pct >= Decimal::ZERO);
        MatchConfig { max_time_delta_secs, max_volume_delta_pct }
    }

    /// The baseline window: 300 seconds, 10 percent.
    pub fn baseline() -> Self {
        MatchConfig::new(300, Decimal::from(10))
    }
}

/// A matched (buy, sell) leg pair.
#[derive(Clone, Debug)]
pub struct ArbitrageAction {
    pub user_id: i64,
    pub dyad: Dyad,
    pub buy: Leg,
    pub sell: Leg,
    /// Time delay between the two legs, seconds.
    pub time_delta_secs: i64,
    /// Volume difference in percent of the mean volume.
    pub volume_delta_pct: Decimal,
    /// UTC hour bucket of the earlier leg.
    pub execution_hour: Timestamp,
}

impl ArbitrageAction {
    fn from_pair(buy: &Leg, sell: &Leg) -> Self {
        let earlier = buy.timestamp.min(sell.timestamp);
        ArbitrageAction {
            user_id: buy.user_id,
            dyad: Dyad::new(buy.currency, sell.currency),
            time_delta_secs: time_delta_secs(buy, sell),
            volume_delta_pct: volume_delta_pct(buy.bitcoins, sell.bitcoins),
            execution_hour: earlier.hour_floor(),
            buy: buy.clone(),
            sell: sell.clone(),
        }
    }

    /// The action's anchor instant: the earlier of the two legs.
    pub fn time(&self) -> Timestamp {
        self.buy.timestamp.min(self.sell.timestamp)
    }

    /// Check the definitional invariants against a window.
    pub fn satisfies(&self, cfg: &MatchConfig) -> bool {
        self.buy.user_id == self.sell.user_id
            && self.buy.trade_id != self.sell.trade_id
            && self.buy.currency != self.sell.currency
            && self.buy.side == Side::Buy
            && self.sell.side == Side::Sell
            && self.time_delta_secs <= cfg.max_time_delta_secs
            && self.volume_delta_pct <= cfg.max_volume_delta_pct
    }
}

/// Absolute time delay between two legs, seconds.
pub fn time_delta_secs(a: &Leg, b: &Leg) -> i64 {
    (a.timestamp.unix() - b.timestamp.unix()).abs()
}

/// Volume difference between two bitcoin amounts, as a percentage of their
/// mean: |a - b| / ((a + b) / 2) * 100. The zero/zero case cannot occur once
/// zero-bitcoin trades are removed upstream.
pub fn volume_delta_pct(a: Decimal, b: Decimal) -> Decimal {
    let mean = (a + b) / Decimal::TWO;
    if mean.is_zero() {
        return Decimal::ZERO;
    }
    ((a - b).abs() / mean) * Decimal::ONE_HUNDRED
}

fn pair_in_window(a: &Leg, b: &Leg, cfg: &MatchConfig) -> bool {
    a.side != b.side
        && a.currency != b.currency
        && a.trade_id != b.trade_id
        && time_delta_secs(a, b) <= cfg.max_time_delta_secs
        && volume_delta_pct(a.bitcoins, b.bitcoins) <= cfg.max_volume_delta_pct
}

/// Enumerate all candidate (buy, sell) index pairs for one user's legs.
///
/// `legs` must be time-sorted. A sliding window bounded by the time delta
/// keeps this O(n * w) rather than quadratic; pairs within the same trade or
/// the same currency never qualify.
pub fn enumerate_candidates(legs: &[Leg], cfg: &MatchConfig) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..legs.len() {
        for j in i + 1..legs.len() {
            if legs[j].timestamp.unix() - legs[i].timestamp.unix() > cfg.max_time_delta_secs {
                break;
            }
            if pair_in_window(&legs[i], &legs[j], cfg) {
                let (buy, sell) =
                    if legs[i].side == Side::Buy { (i, j) } else { (j, i) };
                pairs.push((buy, sell));
            }
        }
    }
    pairs
}

/// Processing order for resolution: chronological, trade id as tiebreak.
fn chronological(legs: &[Leg]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..legs.len()).collect();
    order.sort_by(|&a, &b| {
        legs[a]
            .timestamp
            .cmp(&legs[b].timestamp)
            .then_with(|| legs[a].trade_id.cmp(&legs[b].trade_id))
    });
    order
}

/// Resolve candidates into actions for one user.
///
/// Legs are processed in chronological order (trade id breaking ties); each
/// still-unmatched leg claims its best remaining candidate: smallest time
/// delay, then smallest volume difference, then lexicographically smallest
/// partner trade id. Every leg joins at most one action.
pub fn resolve_matches(legs: &[Leg], candidates: &[(usize, usize)]) -> Vec<ArbitrageAction> {
    let mut partners: Vec<Vec<usize>> = alloc::vec![Vec::new(); legs.len()];
    for &(b, s) in candidates {
        partners[b].push(s);
        partners[s].push(b);
    }

    let mut matched = alloc::vec![false; legs.len()];
    let mut actions = Vec::new();
    for &i in &chronological(legs) {
        if matched[i] {
            continue;
        }
        let mut best: Option<(i64, Decimal, &str, usize)> = None;
        for &j in &partners[i] {
            if matched[j] {
                continue;
            }
            let key = (
                time_delta_secs(&legs[i], &legs[j]),
                volume_delta_pct(legs[i].bitcoins, legs[j].bitcoins),
                legs[j].trade_id.as_str(),
            );
            let better = match &best {
                None => true,
                Some((dt, dq, tid, _)) => key < (*dt, *dq, *tid),
            };
            if better {
                best = Some((key.0, key.1, key.2, j));
            }
        }
        if let Some((_, _, _, j)) = best {
            matched[i] = true;
            matched[j] = true;
            let (buy, sell) = if legs[i].side == Side::Buy { (i, j) } else { (j, i) };
            actions.push(ArbitrageAction::from_pair(&legs[buy], &legs[sell]));
        }
    }
    actions
}

/// Detect all arbitrage actions in a cleaned, aggregated ledger.
///
/// Only users who traded bitcoins against at least two fiat currencies can
/// form actions; everyone else is skipped outright. The output is ordered by
/// (user, action time).
pub fn match_ledger(legs: &[Leg], cfg: &MatchConfig) -> Vec<ArbitrageAction> {
    let mut by_user: BTreeMap<i64, Vec<Leg>> = BTreeMap::new();
    for leg in legs {
        by_user.entry(leg.user_id).or_default().push(leg.clone());
    }

    let mut all = Vec::new();
    for (_, mut user_legs) in by_user {
        let mut currencies: Vec<_> = user_legs.iter().map(|l| l.currency).collect();
        currencies.sort_unstable();
        currencies.dedup();
        if currencies.len() < 2 {
            continue;
        }
        user_legs.sort_by(|a, b| {
            a.timestamp.cmp(&b.timestamp).then_with(|| a.trade_id.cmp(&b.trade_id))
        });
        let candidates = enumerate_candidates(&user_legs, cfg);
        all.extend(resolve_matches(&user_legs, &candidates));
    }
    all
}

/// Action counts over a grid of window thresholds.
pub fn sweep_thresholds(
    legs: &[Leg],
    grid: &[MatchConfig],
) -> Vec<(MatchConfig, usize)> {
    grid.iter().map(|cfg| (*cfg, match_ledger(legs, cfg).len())).collect()
}

/// Stable identity of an action for set comparisons: the two trade ids.
pub fn action_key(action: &ArbitrageAction) -> (String, String) {
    (action.buy.trade_id.clone(), action.sell.trade_id.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::currency::Currency;
    use crate::ledger::{LegFlags, McKind};
    use alloc::format;
    use alloc::vec;

    fn leg(tid: &str, ts: &str, user: i64, side: Side, cur: Currency, btc: &str) -> Leg {
        Leg {
            trade_id: String::from(tid),
            timestamp: Timestamp::parse(ts).unwrap(),
            user_id: user,
            side,
            currency: cur,
            bitcoins: btc.parse().unwrap(),
            money: "10.0".parse().unwrap(),
            money_jpy: "800".parse().unwrap(),
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

    /// The three-cluster scenario: two buys close together (same side, no
    /// pair), a sell/buy pair in different currencies (the only action), and
    /// a buy/sell pair in the same currency (no pair). The extra buy near
    /// the valid cluster collides on currency with the sell and on side with
    /// the buy, so it stays unmatched.
    #[test]
    fn figure_scenario_yields_single_action() {
        let legs = vec![
            leg("a1", "2012-06-01 10:00:00", 7, Side::Buy, Currency::Usd, "5.0"),
            leg("a2", "2012-06-01 10:00:04", 7, Side::Buy, Currency::Eur, "4.9"),
            leg("b1", "2012-06-01 10:10:00", 7, Side::Sell, Currency::Usd, "3.5"),
            leg("b2", "2012-06-01 10:10:08", 7, Side::Buy, Currency::Gbp, "3.5"),
            leg("b3", "2012-06-01 10:10:12", 7, Side::Buy, Currency::Usd, "3.6"),
            leg("c1", "2012-06-01 10:20:00", 7, Side::Buy, Currency::Gbp, "2.0"),
            leg("c2", "2012-06-01 10:20:05", 7, Side::Sell, Currency::Gbp, "2.0"),
        ];
        let cfg = MatchConfig::new(30, Decimal::from(10));
        let actions = match_ledger(&legs, &cfg);
        assert_eq!(actions.len(), 1);
        let action = &actions[0];
        assert_eq!(action.buy.trade_id, "b2");
        assert_eq!(action.sell.trade_id, "b1");
        assert_eq!(action.time_delta_secs, 8);
        assert_eq!(action.dyad.to_string(), "GBP/USD");
        assert!(action.satisfies(&cfg));
    }

    #[test]
    fn single_leg_has_no_candidates() {
        let legs = vec![leg("a", "2012-06-01 10:00:00", 1, Side::Buy, Currency::Usd, "1")];
        assert!(enumerate_candidates(&legs, &MatchConfig::baseline()).is_empty());
    }

    #[test]
    fn closest_in_time_is_chosen() {
        let legs = vec![
            leg("b", "2012-06-01 10:00:00", 1, Side::Buy, Currency::Eur, "1.0"),
            leg("s1", "2012-06-01 10:00:05", 1, Side::Sell, Currency::Usd, "1.0"),
            leg("s2", "2012-06-01 10:00:30", 1, Side::Sell, Currency::Usd, "1.0"),
        ];
        let actions = match_ledger(&legs, &MatchConfig::baseline());
        assert_eq!(actions.len(), 1);
        assert_eq!(actions[0].sell.trade_id, "s1");
        assert_eq!(actions[0].time_delta_secs, 5);
    }

    #[test]
    fn earlier_processed_leg_wins_competition() {
        // Two buys competing for one sell: the chronologically first buy is
        // processed first and claims it, even though the second buy is
        // closer in time.
        let legs = vec![
            leg("b1", "2012-06-01 10:00:00", 1, Side::Buy, Currency::Eur, "1.0"),
            leg("b2", "2012-06-01 10:00:02", 1, Side::Buy, Currency::Eur, "1.0"),
            leg("s", "2012-06-01 10:00:03", 1, Side::Sell, Currency::Usd, "1.0"),
        ];
        let actions = match_ledger(&legs, &MatchConfig::baseline());
        assert_eq!(actions.len(), 1);
        assert_eq!(actions[0].buy.trade_id, "b1");
    }

    #[test]
    fn disjoint_pairs_all_matched() {
        let mut legs = Vec::new();
        for k in 0..5 {
            let t0 = format!("2012-06-01 1{k}:00:00");
            let t1 = format!("2012-06-01 1{k}:00:10");
            legs.push(leg(&format!("b{k}"), &t0, 1, Side::Buy, Currency::Eur, "1.0"));
            legs.push(leg(&format!("s{k}"), &t1, 1, Side::Sell, Currency::Usd, "1.0"));
        }
        let actions = match_ledger(&legs, &MatchConfig::baseline());
        assert_eq!(actions.len(), 5);
    }

    #[test]
    fn volume_delta_uses_symmetric_mean() {
        // |1.0 - 0.9| / 0.95 * 100
        let d = volume_delta_pct("1.0".parse().unwrap(), "0.9".parse().unwrap());
        let expected: Decimal = "10.526315789473684210526315789".parse().unwrap();
        assert!((d - expected).abs() < "1e-20".parse::<Decimal>().unwrap());
    }

    #[test]
    fn same_trade_and_same_currency_excluded() {
        let legs = vec![
            leg("t", "2012-06-01 10:00:00", 1, Side::Buy, Currency::Eur, "1.0"),
            leg("t", "2012-06-01 10:00:00", 1, Side::Sell, Currency::Usd, "1.0"),
            leg("u", "2012-06-01 10:00:01", 1, Side::Buy, Currency::Usd, "1.0"),
            leg("v", "2012-06-01 10:00:02", 1, Side::Sell, Currency::Usd, "1.0"),
        ];
        let candidates = enumerate_candidates(&legs, &MatchConfig::baseline());
        // t-buy/t-sell share a trade id; u/v share a currency. Valid pairs
        // pair the EUR buy with the USD sell, and the USD buy with nothing
        // but the t sell (different trade, different currency? same USD).
        for &(b, s) in &candidates {
            assert_ne!(legs[b].trade_id, legs[s].trade_id);
            assert_ne!(legs[b].currency, legs[s].currency);
        }
    }

    #[test]
    fn nested_configs_give_nested_candidates() {
        let legs = vec![
            leg("a", "2012-06-01 10:00:00", 1, Side::Buy, Currency::Eur, "1.00"),
            leg("b", "2012-06-01 10:00:20", 1, Side::Sell, Currency::Usd, "1.05"),
            leg("c", "2012-06-01 10:03:00", 1, Side::Sell, Currency::Gbp, "1.30"),
        ];
        let small = MatchConfig::new(30, Decimal::from(10));
        let large = MatchConfig::new(300, Decimal::from(30));
        let inner = enumerate_candidates(&legs, &small);
        let outer = enumerate_candidates(&legs, &large);
        for pair in &inner {
            assert!(outer.contains(pair));
        }
        assert!(outer.len() > inner.len());
    }

    #[test]
    fn no_leg_matched_twice() {
        let mut legs = Vec::new();
        for k in 0..40 {
            let side = if k % 2 == 0 { Side::Buy } else { Side::Sell };
            let cur = if k % 4 < 2 { Currency::Eur } else { Currency::Usd };
            let ts = format!("2012-06-01 10:00:{:02}", k % 50);
            legs.push(leg(&format!("t{k}"), &ts, 1, side, cur, "1.0"));
        }
        let actions = match_ledger(&legs, &MatchConfig::baseline());
        let mut seen = Vec::new();
        for action in &actions {
            assert!(!seen.contains(&action.buy.trade_id));
            assert!(!seen.contains(&action.sell.trade_id));
            seen.push(action.buy.trade_id.clone());
            seen.push(action.sell.trade_id.clone());
        }
    }

    #[test]
    fn sweep_counts_are_per_cell() {
        let legs = vec![
            leg("a", "2012-06-01 10:00:00", 1, Side::Buy, Currency::Eur, "1.0"),
            leg("b", "2012-06-01 10:00:20", 1, Side::Sell, Currency::Usd, "1.0"),
        ];
        let grid = vec![
            MatchConfig::new(0, Decimal::ZERO),
            MatchConfig::new(30, Decimal::from(1)),
        ];
        let counts = sweep_thresholds(&legs, &grid);
        assert_eq!(counts[0].1, 0);
        assert_eq!(counts[1].1, 1);
    }

    #[test]
    fn degenerate_window_needs_exact_coincidence() {
        let legs = vec![
            leg("a", "2012-06-01 10:00:00", 1, Side::Buy, Currency::Eur, "1.0"),
            leg("b", "2012-06-01 10:00:00", 1, Side::Sell, Currency::Usd, "1.0"),
        ];
        let cfg = MatchConfig::new(0, Decimal::ZERO);
        assert_eq!(match_ledger(&legs, &cfg).len(), 1);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_soup() -> impl Strategy<Value = Vec<Leg>> {
            proptest::collection::vec(
                (0u8..4, 0u8..2, 0u8..3, 0u16..600, 0u8..4),
                0..60,
            )
            .prop_map(|rows| {
                let currencies = [Currency::Usd, Currency::Eur, Currency::Gbp];
                let base = Timestamp::parse("2012-06-01 10:00:00").unwrap().unix();
                rows.into_iter()
                    .enumerate()
                    .map(|(i, (user, side, cur, offset, vol))| {
                        let mut l = leg(
                            &format!("p{i:03}"),
                            "2012-06-01 10:00:00",
                            user as i64,
                            if side == 0 { Side::Buy } else { Side::Sell },
                            currencies[cur as usize],
                            "1.0",
                        );
                        l.timestamp = Timestamp::from_unix(base + offset as i64);
                        l.bitcoins = Decimal::new(vol as i64 * 25 + 100, 2);
                        l
                    })
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn every_action_valid_and_legs_unique(legs in arb_soup()) {
                let cfg = MatchConfig::new(120, Decimal::from(15));
                let actions = match_ledger(&legs, &cfg);
                let mut used: Vec<&str> = Vec::new();
                for action in &actions {
                    prop_assert!(action.satisfies(&cfg));
                    prop_assert!(!used.contains(&action.buy.trade_id.as_str()));
                    prop_assert!(!used.contains(&action.sell.trade_id.as_str()));
                    used.push(action.buy.trade_id.as_str());
                    used.push(action.sell.trade_id.as_str());
                }
            }

            #[test]
            fn candidates_nest_across_windows(legs in arb_soup()) {
                let small = MatchConfig::new(60, Decimal::from(5));
                let large = MatchConfig::new(240, Decimal::from(20));
                let mut by_user: alloc::collections::BTreeMap<i64, Vec<Leg>> = Default::default();
                for leg in &legs {
                    by_user.entry(leg.user_id).or_default().push(leg.clone());
                }
                for (_, mut user_legs) in by_user {
                    user_legs.sort_by(|a, b| {
                        a.timestamp.cmp(&b.timestamp).then_with(|| a.trade_id.cmp(&b.trade_id))
                    });
                    let inner = enumerate_candidates(&user_legs, &small);
                    let outer = enumerate_candidates(&user_legs, &large);
                    for pair in &inner {
                        prop_assert!(outer.contains(pair));
                    }
                }
            }

            #[test]
            fn volume_delta_symmetric_nonnegative(a in 1u32..1_000_000, b in 1u32..1_000_000) {
                let x = Decimal::new(a as i64, 4);
                let y = Decimal::new(b as i64, 4);
                let d1 = volume_delta_pct(x, y);
                let d2 = volume_delta_pct(y, x);
                prop_assert_eq!(d1, d2);
                prop_assert!(d1 >= Decimal::ZERO);
            }
        }
    }
}
