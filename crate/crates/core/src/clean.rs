//! Deduplication, sanity filters, identifier remapping, same-second
//! aggregation, sample restriction, and the public-dataset merge.
//!
//! Every operation here is a deterministic pass over an ordered ledger: the
//! tie rule for duplicates is keep-first in file order, and all removals are
//! accounted for in a [`CleanReport`] so that
//! `input rows = surviving rows + removed rows` always reconciles.

use core::fmt;
use core::str::FromStr;

use alloc::string::String;
use alloc::string::ToString;
use alloc::vec::Vec;

use hashbrown::{HashMap, HashSet};
use rust_decimal::Decimal;

use crate::currency::Currency;
use crate::ledger::{Initiator, Leg, McKind, PublicTradeRecord, Side};
use crate::time::Timestamp;

/// The four duplicate-detection methods. Each defines a fixed key tuple over
/// leg fields; rows are scanned in file order and the first occurrence of a
/// key survives.
///
/// * `Conservative` keys on (user, timestamp, side, bitcoins, money in JPY).
/// * `Aggressive` drops the JPY amount from that key.
/// * `TradeId` adds the trade id to the aggressive key.
/// * `Pairs` uses the aggressive key but removes a trade only when every one
///   of its legs duplicates a previously seen leg.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DedupMethod {
    Conservative,
    Aggressive,
    TradeId,
    Pairs,
}

impl DedupMethod {
    pub const fn as_str(self) -> &'static str {
        match self {
            DedupMethod::Conservative => "conservative",
            DedupMethod::Aggressive => "aggressive",
            DedupMethod::TradeId => "trade-id",
            DedupMethod::Pairs => "pairs",
        }
    }
}

impl FromStr for DedupMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "conservative" => Ok(DedupMethod::Conservative),
            "aggressive" => Ok(DedupMethod::Aggressive),
            "trade-id" | "tradeid" | "trade_id" => Ok(DedupMethod::TradeId),
            "pairs" => Ok(DedupMethod::Pairs),
            other => Err(other.to_string()),
        }
    }
}

/// Audit trail of the cleaning passes. Counter names mirror the removal and
/// correction rules; removals plus survivors always equal the input rows.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CleanReport {
    pub input_rows: usize,
    pub surviving_rows: usize,
    /// Rows removed by the dedup pass, including legs removed to keep their
    /// trade coherent after a sibling leg was detected as duplicate.
    pub duplicate_rows: usize,
    pub self_trade_rows: usize,
    pub last_day_rows: usize,
    pub deleted_user_rows: usize,
    pub zero_bitcoin_rows: usize,
    pub intermediary_rows: usize,
    pub thk_incomplete_rows: usize,
    /// Trades encountered with a single leg (informational, nothing removed).
    pub orphan_legs: usize,
    /// Legs whose fiat amount was rewritten from the public price.
    pub money_corrected: usize,
    /// Multi-currency legs that needed a correction but had no public counterpart.
    pub missing_public_records: usize,
    /// Public records whose price carried the 10^2 misreporting factor.
    pub sekjpy_corrected: usize,
    pub markus_remapped: usize,
    pub willy_remapped: usize,
}

impl CleanReport {
    pub fn removed_total(&self) -> usize {
        self.duplicate_rows
            + self.self_trade_rows
            + self.last_day_rows
            + self.deleted_user_rows
            + self.zero_bitcoin_rows
            + self.intermediary_rows
            + self.thk_incomplete_rows
    }

    /// Check the accounting identity over this report.
    pub fn reconciles(&self) -> bool {
        self.input_rows == self.surviving_rows + self.removed_total()
    }

    /// Merge the counters of a later pass into this one. The input count
    /// keeps the first pass's value; survivors take the later pass's.
    pub fn absorb(&mut self, later: &CleanReport) {
        self.surviving_rows = later.surviving_rows;
        self.duplicate_rows += later.duplicate_rows;
        self.self_trade_rows += later.self_trade_rows;
        self.last_day_rows += later.last_day_rows;
        self.deleted_user_rows += later.deleted_user_rows;
        self.zero_bitcoin_rows += later.zero_bitcoin_rows;
        self.intermediary_rows += later.intermediary_rows;
        self.thk_incomplete_rows += later.thk_incomplete_rows;
        self.orphan_legs += later.orphan_legs;
        self.money_corrected += later.money_corrected;
        self.missing_public_records += later.missing_public_records;
        self.sekjpy_corrected += later.sekjpy_corrected;
        self.markus_remapped += later.markus_remapped;
        self.willy_remapped += later.willy_remapped;
    }
}

impl fmt::Display for CleanReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "input_rows={}", self.input_rows)?;
        writeln!(f, "surviving_rows={}", self.surviving_rows)?;
        writeln!(f, "duplicate_rows={}", self.duplicate_rows)?;
        writeln!(f, "self_trade_rows={}", self.self_trade_rows)?;
        writeln!(f, "last_day_rows={}", self.last_day_rows)?;
        writeln!(f, "deleted_user_rows={}", self.deleted_user_rows)?;
        writeln!(f, "zero_bitcoin_rows={}", self.zero_bitcoin_rows)?;
        writeln!(f, "intermediary_rows={}", self.intermediary_rows)?;
        writeln!(f, "thk_incomplete_rows={}", self.thk_incomplete_rows)?;
        writeln!(f, "orphan_legs={}", self.orphan_legs)?;
        writeln!(f, "money_corrected={}", self.money_corrected)?;
        writeln!(f, "missing_public_records={}", self.missing_public_records)?;
        writeln!(f, "sekjpy_corrected={}", self.sekjpy_corrected)?;
        writeln!(f, "markus_remapped={}", self.markus_remapped)?;
        write!(f, "willy_remapped={}", self.willy_remapped)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
struct LegKey {
    trade_id: Option<String>,
    user_id: i64,
    timestamp: Timestamp,
    side: Side,
    bitcoins: Decimal,
    money_jpy: Option<Decimal>,
}

fn leg_key(leg: &Leg, method: DedupMethod) -> LegKey {
    LegKey {
        trade_id: match method {
            DedupMethod::TradeId => Some(leg.trade_id.clone()),
            _ => None,
        },
        user_id: leg.user_id,
        timestamp: leg.timestamp,
        side: leg.side,
        bitcoins: leg.bitcoins,
        money_jpy: match method {
            DedupMethod::Conservative => Some(leg.money_jpy),
            _ => None,
        },
    }
}

/// Group row indices by trade id, in order of first appearance.
fn trades_in_order(legs: &[Leg]) -> Vec<Vec<usize>> {
    let mut order: Vec<Vec<usize>> = Vec::new();
    let mut by_id: HashMap<&str, usize> = HashMap::new();
    for (i, leg) in legs.iter().enumerate() {
        match by_id.get(leg.trade_id.as_str()) {
            Some(&slot) => order[slot].push(i),
            None => {
                by_id.insert(leg.trade_id.as_str(), order.len());
                order.push(alloc::vec![i]);
            }
        }
    }
    order
}

/// Remove duplicate rows with the given method, keep-first in file order.
///
/// For `Conservative`, `Aggressive`, and `TradeId` the duplicate test is per
/// leg; a trade that loses a whole side to deduplication is then removed
/// entirely, so no one-sided trades remain. `Pairs` decides per trade: it
/// is removed only when every one of its legs duplicates a leg of an
/// earlier trade.
pub fn dedup(legs: &[Leg], method: DedupMethod) -> (Vec<Leg>, CleanReport) {
    let mut report = CleanReport { input_rows: legs.len(), ..CleanReport::default() };
    let trades = trades_in_order(legs);
    let mut keep_row = alloc::vec![true; legs.len()];

    match method {
        DedupMethod::Pairs => {
            let mut seen: HashSet<LegKey> = HashSet::new();
            for rows in &trades {
                if rows.len() < 2 {
                    report.orphan_legs += rows.len();
                }
                let keys: Vec<LegKey> =
                    rows.iter().map(|&i| leg_key(&legs[i], DedupMethod::Aggressive)).collect();
                let all_dup = keys.iter().all(|k| seen.contains(k));
                if all_dup {
                    for &i in rows {
                        keep_row[i] = false;
                    }
                } else {
                    for k in keys {
                        seen.insert(k);
                    }
                }
            }
        }
        _ => {
            // Leg-level keep-first marking.
            let mut seen: HashSet<LegKey> = HashSet::new();
            for (i, leg) in legs.iter().enumerate() {
                if !seen.insert(leg_key(leg, method)) {
                    keep_row[i] = false;
                }
            }
            // Trade coherence: if deduplication wiped out one side of a
            // trade, its remaining legs have no counterparty and go too.
            for rows in &trades {
                let mut sides_before = (false, false);
                let mut sides_after = (false, false);
                for &i in rows {
                    match legs[i].side {
                        Side::Buy => {
                            sides_before.0 = true;
                            sides_after.0 |= keep_row[i];
                        }
                        Side::Sell => {
                            sides_before.1 = true;
                            sides_after.1 |= keep_row[i];
                        }
                    }
                }
                if sides_before != sides_after {
                    for &i in rows {
                        keep_row[i] = false;
                    }
                }
            }
        }
    }

    let survivors: Vec<Leg> = legs
        .iter()
        .zip(keep_row.iter())
        .filter(|(_, &keep)| keep)
        .map(|(leg, _)| leg.clone())
        .collect();
    report.duplicate_rows = legs.len() - survivors.len();
    report.surviving_rows = survivors.len();
    (survivors, report)
}

/// Options for [`sanity_filter`].
#[derive(Clone, Debug)]
pub struct SanityOptions {
    /// Keep (flagged) the primary legs of multi-currency trades whose
    /// secondary side is missing, instead of removing them.
    pub include_thk_primaries: bool,
    /// Original id of the account whose buy-side fiat amounts are
    /// transcription noise; remapped onto `markus_target`.
    pub markus_source: i64,
    pub markus_target: i64,
    /// The bot accounts collapsed onto a single out-of-range id.
    pub willy_ids: Vec<i64>,
    pub willy_target: i64,
    /// Public SEK/JPY prices dated strictly before this instant carry a 10^2
    /// misreporting factor.
    pub sekjpy_cutoff: Timestamp,
    /// Relative disagreement between the leaked fiat/bitcoin ratio and the
    /// public price beyond which a multi-currency leg is rewritten.
    pub correction_tolerance: f64,
}

impl Default for SanityOptions {
    fn default() -> Self {
        SanityOptions {
            include_thk_primaries: false,
            markus_source: 698_630,
            markus_target: 635,
            willy_ids: Vec::new(),
            willy_target: 1_000_000,
            sekjpy_cutoff: Timestamp::from_ymd_hms(2013, 9, 12, 0, 0, 0).unwrap(),
            correction_tolerance: 0.01,
        }
    }
}

fn decimal_to_f64(d: Decimal) -> f64 {
    use rust_decimal::prelude::ToPrimitive;
    d.to_f64().unwrap_or(0.0)
}

/// Price of a public record after undoing the SEK/JPY 10^2 misreporting.
///
/// The factor's direction is validated per row against the leaked
/// fiat/bitcoin ratio when a trusted leg is available; otherwise records
/// dated before the cutoff default to a division by 100. Returns the
/// corrected price and whether a correction was applied.
fn sekjpy_price(
    record: &PublicTradeRecord,
    trusted_ratio: Option<f64>,
    cutoff: Timestamp,
) -> (Decimal, bool) {
    if record.currency != Currency::Sek && record.currency != Currency::Jpy {
        return (record.price, false);
    }
    let before_cutoff = match crate::ledger::decode_trade_id_time(&record.trade_id) {
        Some((ts, _)) => ts < cutoff,
        // Sequential-era identifiers all predate the cutoff.
        None => true,
    };
    if !before_cutoff {
        return (record.price, false);
    }
    let hundred = Decimal::from(100);
    match trusted_ratio {
        Some(ratio) if ratio > 0.0 => {
            let p = decimal_to_f64(record.price);
            let candidates = [
                (record.price / hundred, p / 100.0),
                (record.price, p),
                (record.price * hundred, p * 100.0),
            ];
            let mut best = 0;
            let mut best_err = f64::INFINITY;
            for (i, (_, v)) in candidates.iter().enumerate() {
                let err = libm::fabs(libm::log(*v / ratio));
                if err < best_err {
                    best_err = err;
                    best = i;
                }
            }
            (candidates[best].0, best != 1)
        }
        _ => (record.price / hundred, true),
    }
}

/// Apply the dataset sanity checks.
///
/// Removes, in order: the ledger's final UTC day, self-trades, trades of
/// DELETED users, zero-bitcoin trades, intermediary rows, and the remains of
/// multi-currency trades whose secondary side is missing (kept flagged when
/// `include_thk_primaries` is set). Corrects the fiat amount of
/// multi-currency legs that copied the primary currency's value, using
/// public prices adjusted for the SEK/JPY factor. Finally remaps the special
/// account ids.
pub fn sanity_filter(
    legs: &[Leg],
    public: &[PublicTradeRecord],
    opts: &SanityOptions,
) -> (Vec<Leg>, CleanReport) {
    let mut report = CleanReport { input_rows: legs.len(), ..CleanReport::default() };
    let mut out: Vec<Leg> = Vec::with_capacity(legs.len());

    let public_by_id: HashMap<&str, &PublicTradeRecord> =
        public.iter().map(|r| (r.trade_id.as_str(), r)).collect();

    // Trusted leaked ratios (fiat per bitcoin) from standard-scheme legs,
    // used to orient the SEK/JPY factor.
    let mut trusted_ratio: HashMap<&str, f64> = HashMap::new();
    for leg in legs {
        if leg.mc_kind == McKind::Standard
            && !leg.flags.intermediary
            && leg.bitcoins > Decimal::ZERO
        {
            trusted_ratio
                .entry(leg.trade_id.as_str())
                .or_insert_with(|| decimal_to_f64(leg.money) / decimal_to_f64(leg.bitcoins));
        }
    }
    // Count each misreported public record once, up front.
    let mut sek_counted: HashSet<&str> = HashSet::new();
    for record in public {
        let ratio = trusted_ratio.get(record.trade_id.as_str()).copied();
        let (_, corrected) = sekjpy_price(record, ratio, opts.sekjpy_cutoff);
        if corrected && sek_counted.insert(record.trade_id.as_str()) {
            report.sekjpy_corrected += 1;
        }
    }

    let last_day = legs.iter().map(|l| l.timestamp.day_index()).max();

    // Trade-level removal decisions need the trade's rows together.
    let trades = trades_in_order(legs);
    let mut remove_reason: HashMap<usize, &'static str> = HashMap::new();
    for (slot, rows) in trades.iter().enumerate() {
        let members: Vec<&Leg> = rows.iter().map(|&i| &legs[i]).collect();
        let buyers: Vec<i64> = members
            .iter()
            .filter(|l| l.side == Side::Buy && !l.flags.intermediary)
            .map(|l| l.user_id)
            .collect();
        let sellers: Vec<i64> = members
            .iter()
            .filter(|l| l.side == Side::Sell && !l.flags.intermediary)
            .map(|l| l.user_id)
            .collect();
        let self_trade = buyers.iter().any(|b| sellers.contains(b));
        if self_trade {
            remove_reason.insert(slot, "self");
        } else if members.iter().any(|l| l.flags.deleted_user) {
            remove_reason.insert(slot, "deleted");
        } else if members.iter().any(|l| l.bitcoins.is_zero()) {
            remove_reason.insert(slot, "zero");
        }
    }
    let mut slot_of_trade: HashMap<&str, usize> = HashMap::new();
    for (slot, rows) in trades.iter().enumerate() {
        slot_of_trade.insert(legs[rows[0]].trade_id.as_str(), slot);
    }

    for leg in legs {
        // Final-day removal runs first: the closing day is inconsistent as a
        // whole, regardless of any other property of the row.
        if Some(leg.timestamp.day_index()) == last_day {
            report.last_day_rows += 1;
            continue;
        }
        let slot = slot_of_trade[leg.trade_id.as_str()];
        match remove_reason.get(&slot) {
            Some(&"self") => {
                report.self_trade_rows += 1;
                continue;
            }
            Some(&"deleted") => {
                report.deleted_user_rows += 1;
                continue;
            }
            Some(&"zero") => {
                report.zero_bitcoin_rows += 1;
                continue;
            }
            _ => {}
        }
        if leg.flags.intermediary {
            report.intermediary_rows += 1;
            continue;
        }

        let mut leg = leg.clone();

        // Multi-currency legs that copied the primary currency's fiat value
        // are rewritten from the public price for their own trade.
        if leg.mc_kind != McKind::Standard && leg.bitcoins > Decimal::ZERO {
            match public_by_id.get(leg.trade_id.as_str()) {
                Some(record) => {
                    let ratio = trusted_ratio.get(leg.trade_id.as_str()).copied();
                    let (price, _) = sekjpy_price(record, ratio, opts.sekjpy_cutoff);
                    let expected = price * leg.bitcoins;
                    let leg_ratio = decimal_to_f64(leg.money) / decimal_to_f64(leg.bitcoins);
                    let pub_price = decimal_to_f64(price);
                    let rel = if pub_price > 0.0 {
                        libm::fabs(leg_ratio - pub_price) / pub_price
                    } else {
                        0.0
                    };
                    if rel > opts.correction_tolerance {
                        leg.money = expected;
                        leg.flags.money_corrected = true;
                        report.money_corrected += 1;
                    }
                }
                None => {
                    leg.flags.uncorrectable = true;
                    report.missing_public_records += 1;
                }
            }
        }

        // Incomplete multi-currency trades: the secondary side was never
        // transcribed, so the surviving primary legs have no counterparty.
        if leg.mc_kind == McKind::Thk {
            if opts.include_thk_primaries {
                leg.flags.thk_primary = true;
            } else {
                report.thk_incomplete_rows += 1;
                continue;
            }
        }

        if leg.user_id == opts.markus_source {
            leg.user_id = opts.markus_target;
            report.markus_remapped += 1;
        } else if opts.willy_ids.contains(&leg.user_id) {
            leg.user_id = opts.willy_target;
            report.willy_remapped += 1;
        }

        out.push(leg);
    }

    report.surviving_rows = out.len();
    (out, report)
}

/// Replace user ids with their rank in the sorted order of distinct original
/// ids, dense from 1. Sentinel ids (negative) pass through unchanged. The
/// mapping is returned separately and must never reach analysis outputs.
pub fn anonymize_users(legs: &[Leg]) -> (Vec<Leg>, Vec<(i64, i64)>) {
    let mut ids: Vec<i64> = legs.iter().map(|l| l.user_id).filter(|&id| id >= 0).collect();
    ids.sort_unstable();
    ids.dedup();
    let rank: HashMap<i64, i64> =
        ids.iter().enumerate().map(|(i, &id)| (id, i as i64 + 1)).collect();
    let out = legs
        .iter()
        .map(|l| {
            let mut leg = l.clone();
            if let Some(&new) = rank.get(&leg.user_id) {
                leg.user_id = new;
            }
            leg
        })
        .collect();
    let mapping = ids.iter().map(|&id| (id, rank[&id])).collect();
    (out, mapping)
}

/// Merge legs of the same user, second, side, and currency into one
/// synthetic leg. Amounts and fees are summed exactly; the synthetic trade
/// id records the member ids joined by `+`, and `merged_count` keeps the
/// number of raw legs absorbed. Side and currency are part of the key so a
/// buy is never merged with a sell.
pub fn aggregate_same_second(legs: &[Leg]) -> Vec<Leg> {
    #[derive(PartialEq, Eq, Hash)]
    struct Key(i64, Timestamp, Side, Currency);

    let mut groups: HashMap<Key, usize> = HashMap::new();
    let mut out: Vec<Leg> = Vec::with_capacity(legs.len());
    for leg in legs {
        let key = Key(leg.user_id, leg.timestamp, leg.side, leg.currency);
        match groups.get(&key) {
            None => {
                groups.insert(key, out.len());
                out.push(leg.clone());
            }
            Some(&slot) => {
                let merged = &mut out[slot];
                merged.trade_id.push('+');
                merged.trade_id.push_str(&leg.trade_id);
                merged.bitcoins += leg.bitcoins;
                merged.money += leg.money;
                merged.money_jpy += leg.money_jpy;
                merged.money_fee += leg.money_fee;
                merged.bitcoin_fee += leg.bitcoin_fee;
                merged.merged_count += leg.merged_count;
                // Aggressiveness spreads to the merged order; typology is
                // kept only when the members agree.
                merged.aggressive = match (merged.aggressive, leg.aggressive) {
                    (Some(a), Some(b)) => Some(a || b),
                    _ => None,
                };
                if merged.order_kind != leg.order_kind {
                    merged.order_kind = None;
                }
                merged.flags.money_corrected |= leg.flags.money_corrected;
                merged.flags.uncorrectable |= leg.flags.uncorrectable;
                merged.flags.thk_primary |= leg.flags.thk_primary;
            }
        }
    }
    out
}

/// Keep only legs strictly before the cutoff instant.
pub fn restrict_sample(legs: &[Leg], cutoff: Timestamp) -> Vec<Leg> {
    legs.iter().filter(|l| l.timestamp < cutoff).cloned().collect()
}

/// Join statistics from [`merge_public`].
#[derive(Clone, Copy, Debug, Default)]
pub struct MergeStats {
    pub matched: usize,
    pub missed: usize,
}

/// Annotate legs with the order typology from the public dataset. The leg on
/// the initiating side of a market order (bid initiates the buy leg, ask the
/// sell leg) is flagged aggressive. Join misses leave both annotations
/// absent and are counted, not fatal.
pub fn merge_public(legs: &[Leg], public: &[PublicTradeRecord]) -> (Vec<Leg>, MergeStats) {
    let by_id: HashMap<&str, &PublicTradeRecord> =
        public.iter().map(|r| (r.trade_id.as_str(), r)).collect();
    let mut stats = MergeStats::default();
    let out = legs
        .iter()
        .map(|l| {
            let mut leg = l.clone();
            match by_id.get(leg.trade_id.as_str()) {
                Some(record) => {
                    stats.matched += 1;
                    leg.order_kind = Some(record.order_kind);
                    let initiated = record.order_kind.is_market()
                        && matches!(
                            (record.initiator, leg.side),
                            (Initiator::Bid, Side::Buy) | (Initiator::Ask, Side::Sell)
                        );
                    leg.aggressive = Some(initiated);
                }
                None => {
                    stats.missed += 1;
                }
            }
            leg
        })
        .collect();
    (out, stats)
}

/// One day of the volume reconciliation against an external source.
#[derive(Clone, Debug)]
pub struct DailyVolumeDiff {
    pub day: Timestamp,
    pub ledger_volume: Decimal,
    pub external_volume: Decimal,
    /// (ledger - external) normalized on the ledger volume; 0 when the
    /// ledger volume is zero.
    pub normalized_diff: f64,
    /// 15-day centered moving average of the normalized differences, using
    /// only the days available near the edges of the series.
    pub moving_avg: f64,
}

/// Compare daily USD volumes in the ledger against an external daily series.
///
/// The ledger's daily volume is the sum of fiat over USD sell legs (one side
/// per trade). The combined calendar spans both series; days absent from
/// either side count as zero volume.
pub fn compare_daily_volumes(
    legs: &[Leg],
    external: &[(Timestamp, Decimal)],
) -> Vec<DailyVolumeDiff> {
    use alloc::collections::BTreeMap;

    let mut ledger: BTreeMap<i64, Decimal> = BTreeMap::new();
    for leg in legs {
        if leg.currency == Currency::Usd && leg.side == Side::Sell {
            *ledger.entry(leg.timestamp.day_index()).or_insert(Decimal::ZERO) += leg.money;
        }
    }
    let mut ext: BTreeMap<i64, Decimal> = BTreeMap::new();
    for (day, vol) in external {
        *ext.entry(day.day_index()).or_insert(Decimal::ZERO) += *vol;
    }

    let first = ledger.keys().chain(ext.keys()).min().copied();
    let last = ledger.keys().chain(ext.keys()).max().copied();
    let (Some(first), Some(last)) = (first, last) else {
        return Vec::new();
    };

    let mut diffs: Vec<f64> = Vec::new();
    let mut rows: Vec<DailyVolumeDiff> = Vec::new();
    for day in first..=last {
        let lv = ledger.get(&day).copied().unwrap_or(Decimal::ZERO);
        let ev = ext.get(&day).copied().unwrap_or(Decimal::ZERO);
        let lf = decimal_to_f64(lv);
        let diff = if lf != 0.0 { (lf - decimal_to_f64(ev)) / lf } else { 0.0 };
        diffs.push(diff);
        rows.push(DailyVolumeDiff {
            day: Timestamp::from_unix(day * crate::time::SECS_PER_DAY),
            ledger_volume: lv,
            external_volume: ev,
            normalized_diff: diff,
            moving_avg: 0.0,
        });
    }
    for (i, row) in rows.iter_mut().enumerate() {
        let lo = i.saturating_sub(7);
        let hi = (i + 7).min(diffs.len() - 1);
        let window = &diffs[lo..=hi];
        row.moving_avg = window.iter().sum::<f64>() / window.len() as f64;
    }
    rows
}
