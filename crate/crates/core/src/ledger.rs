//! Domain types and parsers for the raw trade data.
//!
//! Three inputs exist: the leaked per-leg trade log (two format families of
//! 15 columns, one of 19, plus the July 2012 exception), the public aggregate
//! trade file (one row per trade, with order typology), and hourly
//! official-rate files (only the open price is retained).
//!
//! Parsers are pure functions over UTF-8 text. Malformed rows are collected
//! and reported alongside the parsed rows, never silently dropped. Filtering
//! (DELETED users, intermediaries, and so on) is not the parser's job; those
//! rows come out flagged and are handled by [`crate::clean`].

use core::fmt;
use core::str::FromStr;

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use hashbrown::{HashMap, HashSet};
use rust_decimal::Decimal;

use crate::currency::{Currency, CurrencyPair};
use crate::time::Timestamp;

/// Sentinel user id for rows whose user field reads `DELETED`.
pub const DELETED_USER_ID: i64 = -1;
/// Sentinel user id for exchange-intermediary rows (`TIBANNE_LIMITED_HK`, `THK`).
pub const INTERMEDIARY_USER_ID: i64 = -2;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub const fn as_str(self) -> &'static str {
        match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a multi-currency trade was transcribed in its source file.
/// The two schemes never mix within one file.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum McKind {
    #[default]
    Standard,
    Tibanne,
    Thk,
}

impl McKind {
    pub const fn as_u8(self) -> u8 {
        match self {
            McKind::Standard => 0,
            McKind::Tibanne => 1,
            McKind::Thk => 2,
        }
    }
}

/// Carried opaquely; the semantics of this field are not established.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum JapanFlag {
    Jp,
    Njp,
    #[default]
    Unknown,
}

impl JapanFlag {
    pub const fn as_str(self) -> &'static str {
        match self {
            JapanFlag::Jp => "JP",
            JapanFlag::Njp => "NJP",
            JapanFlag::Unknown => "",
        }
    }
}

/// Order typology from the public dataset.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum OrderKind {
    Limit,
    Market,
    LimitMixed,
    MarketMixed,
}

impl OrderKind {
    pub const fn as_str(self) -> &'static str {
        match self {
            OrderKind::Limit => "limit",
            OrderKind::Market => "market",
            OrderKind::LimitMixed => "limit,mixed_currency",
            OrderKind::MarketMixed => "market,mixed_currency",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "limit" => Some(OrderKind::Limit),
            "market" => Some(OrderKind::Market),
            "limit,mixed_currency" => Some(OrderKind::LimitMixed),
            "market,mixed_currency" => Some(OrderKind::MarketMixed),
            _ => None,
        }
    }

    pub const fn is_market(self) -> bool {
        matches!(self, OrderKind::Market | OrderKind::MarketMixed)
    }
}

/// Which party initiated the trade, from the public dataset.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Initiator {
    Bid,
    Ask,
}

impl Initiator {
    pub const fn as_str(self) -> &'static str {
        match self {
            Initiator::Bid => "bid",
            Initiator::Ask => "ask",
        }
    }
}

/// Provenance and correction flags attached to a leg as it moves through the
/// cleaning pipeline.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct LegFlags {
    /// The user field read `DELETED` in the source file.
    pub deleted_user: bool,
    /// The row belongs to the exchange acting as multi-currency intermediary.
    pub intermediary: bool,
    /// The fiat amount was rewritten from the public dataset price.
    pub money_corrected: bool,
    /// A correction was needed but no public record existed for the trade.
    pub uncorrectable: bool,
    /// Primary leg of an incomplete multi-currency trade, retained on request.
    pub thk_primary: bool,
}

/// One side of a trade: the atomic row of the leaked log.
#[derive(Clone, PartialEq, Debug)]
pub struct Leg {
    pub trade_id: String,
    pub timestamp: Timestamp,
    pub user_id: i64,
    pub side: Side,
    pub currency: Currency,
    /// Amount of bitcoins exchanged (non-negative, 8 fractional digits kept).
    pub bitcoins: Decimal,
    /// Fiat amount in the leg currency.
    pub money: Decimal,
    /// Fiat amount expressed in JPY.
    pub money_jpy: Decimal,
    /// Fee paid in the leg currency.
    pub money_fee: Decimal,
    /// Fee paid in bitcoins.
    pub bitcoin_fee: Decimal,
    /// Conversion rate used for `money_jpy`.
    pub money_rate: Decimal,
    /// Conversion rate used for the fee fields.
    pub money_fee_rate: Decimal,
    pub japan: JapanFlag,
    pub user_country: Option<String>,
    pub user_state: Option<String>,
    pub mc_kind: McKind,
    /// Number of raw legs merged into this one by same-second aggregation.
    pub merged_count: u32,
    /// Order typology, filled by the public-dataset merge.
    pub order_kind: Option<OrderKind>,
    /// Whether this leg initiated a market order. `None` until annotated.
    pub aggressive: Option<bool>,
    pub flags: LegFlags,
}

/// A complete trade: the matched buy and sell legs sharing one trade id.
#[derive(Clone, Debug)]
pub struct Trade {
    pub trade_id: String,
    pub buy_leg: Leg,
    pub sell_leg: Leg,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TradeError {
    SideMismatch,
    TradeIdMismatch,
    BitcoinMismatch,
}

impl fmt::Display for TradeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TradeError::SideMismatch => f.write_str("legs are not a (buy, sell) pair"),
            TradeError::TradeIdMismatch => f.write_str("legs carry different trade ids"),
            TradeError::BitcoinMismatch => f.write_str("legs disagree on bitcoins traded"),
        }
    }
}

impl Trade {
    pub fn new(buy_leg: Leg, sell_leg: Leg) -> Result<Self, TradeError> {
        if buy_leg.side != Side::Buy || sell_leg.side != Side::Sell {
            return Err(TradeError::SideMismatch);
        }
        if buy_leg.trade_id != sell_leg.trade_id {
            return Err(TradeError::TradeIdMismatch);
        }
        if buy_leg.bitcoins != sell_leg.bitcoins {
            return Err(TradeError::BitcoinMismatch);
        }
        Ok(Trade { trade_id: buy_leg.trade_id.clone(), buy_leg, sell_leg })
    }
}

/// One row of the public aggregate dataset.
#[derive(Clone, Debug)]
pub struct PublicTradeRecord {
    pub trade_id: String,
    pub currency: Currency,
    /// Bitcoins traded.
    pub amount: Decimal,
    /// Fiat per bitcoin.
    pub price: Decimal,
    pub order_kind: OrderKind,
    pub initiator: Initiator,
}

/// Hourly official exchange-rate observation; only the open is retained.
#[derive(Clone, Debug)]
pub struct RateBar {
    pub pair: CurrencyPair,
    /// Start of the UTC hour.
    pub hour: Timestamp,
    /// Opening price, quote units per base unit, strictly positive.
    pub open: Decimal,
}

/// The structural families of the leaked monthly files.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FormatFamily {
    /// April 2011: 15 columns, no multi-currency trades.
    April2011,
    /// May 2011 - October 2012 (except July 2012): 15 columns, Tibanne scheme.
    May11ToOct12,
    /// November 2012 - November 2013: 19 columns, THK scheme.
    Nov12ToNov13,
    /// July 2012: 15 columns, but multi-currency trades follow the THK scheme.
    July2012Exception,
}

impl FormatFamily {
    /// Family of the monthly file covering `(year, month)`.
    /// Total over the months the dataset covers; `None` outside it.
    pub fn for_month(year: i64, month: u32) -> Option<FormatFamily> {
        match (year, month) {
            (2011, 4) => Some(FormatFamily::April2011),
            (2012, 7) => Some(FormatFamily::July2012Exception),
            (2011, 5..=12) => Some(FormatFamily::May11ToOct12),
            (2012, 1..=10) => Some(FormatFamily::May11ToOct12),
            (2012, 11..=12) => Some(FormatFamily::Nov12ToNov13),
            (2013, 1..=11) => Some(FormatFamily::Nov12ToNov13),
            _ => None,
        }
    }

    pub const fn column_count(self) -> usize {
        match self {
            FormatFamily::Nov12ToNov13 => 19,
            _ => 15,
        }
    }

    pub const fn as_str(self) -> &'static str {
        match self {
            FormatFamily::April2011 => "april-2011",
            FormatFamily::May11ToOct12 => "may11-oct12",
            FormatFamily::Nov12ToNov13 => "nov12-nov13",
            FormatFamily::July2012Exception => "july-2012",
        }
    }
}

impl FromStr for FormatFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "april-2011" => Ok(FormatFamily::April2011),
            "may11-oct12" => Ok(FormatFamily::May11ToOct12),
            "nov12-nov13" => Ok(FormatFamily::Nov12ToNov13),
            "july-2012" => Ok(FormatFamily::July2012Exception),
            other => Err(other.to_string()),
        }
    }
}

const LEAKED_COLUMNS_15: [&str; 15] = [
    "Trade_Id",
    "Date",
    "User_Id",
    "Japan",
    "Type",
    "Currency",
    "Bitcoins",
    "Money",
    "Money_Rate",
    "Money_JPY",
    "Money_Fee",
    "Money_Fee_Rate",
    "Money_Fee_JPY",
    "Bitcoin_Fee",
    "Bitcoin_Fee_JPY",
];

const LEAKED_COLUMNS_EXTRA_19: [&str; 4] = ["User", "User_Id_Hash", "User_Country", "User_State"];

pub const PUBLIC_COLUMNS: [&str; 6] =
    ["Trade_Id", "Currency", "Amount", "Price", "Order_Kind", "Initiator"];

/// Expected header for a leaked file of the given family.
pub fn leaked_header(family: FormatFamily) -> Vec<&'static str> {
    let mut cols: Vec<&'static str> = LEAKED_COLUMNS_15.to_vec();
    if family.column_count() == 19 {
        cols.extend_from_slice(&LEAKED_COLUMNS_EXTRA_19);
    }
    cols
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RowErrorKind {
    /// A field that should be a decimal number did not parse.
    BadDecimal,
    /// The date field did not parse.
    BadDate,
    /// The user field was neither an integer nor a known sentinel.
    BadUser,
    /// The currency code is outside the known set.
    BadCurrency,
    /// An enumerated field held an unknown literal.
    BadEnumValue,
    /// Wrong number of fields on the row.
    WrongFieldCount,
    /// A value violated a domain constraint (negative amount, zero rate).
    BadValue,
}

impl RowErrorKind {
    pub const fn as_str(self) -> &'static str {
        match self {
            RowErrorKind::BadDecimal => "bad-decimal",
            RowErrorKind::BadDate => "bad-date",
            RowErrorKind::BadUser => "bad-user",
            RowErrorKind::BadCurrency => "bad-currency",
            RowErrorKind::BadEnumValue => "bad-enum-value",
            RowErrorKind::WrongFieldCount => "wrong-field-count",
            RowErrorKind::BadValue => "bad-value",
        }
    }
}

/// A malformed row, reported with its 1-based line number and the offending
/// text. The surrounding rows still parse.
#[derive(Clone, Debug)]
pub struct RowError {
    pub line: usize,
    pub kind: RowErrorKind,
    pub field: &'static str,
    pub value: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "line {}: {} in field {} ({:?})",
            self.line,
            self.kind.as_str(),
            self.field,
            self.value
        )
    }
}

#[derive(Clone, Debug)]
pub enum ParseError {
    /// The header row does not match the family's column set.
    UnknownColumnSet { expected: Vec<&'static str>, found: String },
    /// The input has no header row at all.
    MissingHeader,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseError::UnknownColumnSet { expected, found } => {
                write!(f, "header mismatch: expected {} columns, found {found:?}", expected.len())
            }
            ParseError::MissingHeader => f.write_str("input has no header row"),
        }
    }
}

/// Split one CSV line into fields, honoring double quotes (the public file
/// quotes order kinds that contain commas). Fields are trimmed.
pub fn split_csv_line(line: &str, out: &mut Vec<String>) {
    out.clear();
    let bytes = line.as_bytes();
    let mut field = String::new();
    let mut i = 0;
    let mut in_quotes = false;
    while i < bytes.len() {
        let b = bytes[i];
        if in_quotes {
            if b == b'"' {
                if i + 1 < bytes.len() && bytes[i + 1] == b'"' {
                    field.push('"');
                    i += 1;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push(b as char);
            }
        } else if b == b'"' {
            in_quotes = true;
        } else if b == b',' {
            out.push(field.trim().to_string());
            field.clear();
        } else {
            field.push(b as char);
        }
        i += 1;
    }
    out.push(field.trim().to_string());
}

/// Outcome of parsing one leaked-format file.
#[derive(Clone, Debug, Default)]
pub struct LeakedFile {
    pub legs: Vec<Leg>,
    pub row_errors: Vec<RowError>,
}

fn parse_decimal(
    fields: &[String],
    idx: usize,
    name: &'static str,
    line: usize,
    errors: &mut Vec<RowError>,
) -> Option<Decimal> {
    let raw = &fields[idx];
    match Decimal::from_str(raw.trim()) {
        Ok(d) => Some(d),
        Err(_) => {
            errors.push(RowError {
                line,
                kind: RowErrorKind::BadDecimal,
                field: name,
                value: raw.clone(),
            });
            None
        }
    }
}

fn non_negative(
    value: Decimal,
    name: &'static str,
    line: usize,
    errors: &mut Vec<RowError>,
) -> Option<Decimal> {
    if value < Decimal::ZERO {
        errors.push(RowError {
            line,
            kind: RowErrorKind::BadValue,
            field: name,
            value: value.to_string(),
        });
        None
    } else {
        Some(value)
    }
}

/// Parse one leaked-format monthly file.
///
/// The header must match the family's column set exactly. Each well-formed
/// row becomes one [`Leg`]; rows with bad fields are reported in
/// `row_errors`. Multi-currency kinds are assigned per trade: any trade id
/// that has an intermediary row is marked with that intermediary's scheme on
/// all of its legs.
pub fn parse_leaked_file(input: &str, family: FormatFamily) -> Result<LeakedFile, ParseError> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or(ParseError::MissingHeader)?;

    let expected = leaked_header(family);
    let mut fields: Vec<String> = Vec::new();
    split_csv_line(header, &mut fields);
    let header_ok = fields.len() == expected.len()
        && fields
            .iter()
            .zip(expected.iter())
            .all(|(got, want)| got.eq_ignore_ascii_case(want));
    if !header_ok {
        return Err(ParseError::UnknownColumnSet { expected, found: String::from(header.trim()) });
    }

    let ncols = family.column_count();
    let mut legs: Vec<Leg> = Vec::new();
    let mut errors: Vec<RowError> = Vec::new();
    // Trade ids that carry an intermediary row, discovered in the same pass.
    let mut mc_trades: HashMap<String, McKind> = HashMap::new();

    for (line_idx, line) in lines {
        let line_no = line_idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        split_csv_line(line, &mut fields);
        if fields.len() != ncols {
            errors.push(RowError {
                line: line_no,
                kind: RowErrorKind::WrongFieldCount,
                field: "row",
                value: String::from(line),
            });
            continue;
        }

        let trade_id = fields[0].clone();
        let timestamp = match Timestamp::parse(&fields[1]) {
            Ok(t) => t,
            Err(_) => {
                errors.push(RowError {
                    line: line_no,
                    kind: RowErrorKind::BadDate,
                    field: "Date",
                    value: fields[1].clone(),
                });
                continue;
            }
        };

        let mut flags = LegFlags::default();
        let user_raw = fields[2].trim();
        let user_id = if user_raw.eq_ignore_ascii_case("DELETED") {
            flags.deleted_user = true;
            DELETED_USER_ID
        } else if user_raw == "TIBANNE_LIMITED_HK" {
            flags.intermediary = true;
            mc_trades.insert(trade_id.clone(), McKind::Tibanne);
            INTERMEDIARY_USER_ID
        } else if user_raw == "THK" {
            flags.intermediary = true;
            mc_trades.insert(trade_id.clone(), McKind::Thk);
            INTERMEDIARY_USER_ID
        } else {
            match user_raw.parse::<i64>() {
                Ok(id) if id >= 0 => id,
                _ => {
                    errors.push(RowError {
                        line: line_no,
                        kind: RowErrorKind::BadUser,
                        field: "User_Id",
                        value: fields[2].clone(),
                    });
                    continue;
                }
            }
        };

        let japan = match fields[3].trim() {
            "JP" => JapanFlag::Jp,
            "NJP" => JapanFlag::Njp,
            _ => JapanFlag::Unknown,
        };

        let side = match fields[4].trim().to_ascii_lowercase().as_str() {
            "buy" => Side::Buy,
            "sell" => Side::Sell,
            _ => {
                errors.push(RowError {
                    line: line_no,
                    kind: RowErrorKind::BadEnumValue,
                    field: "Type",
                    value: fields[4].clone(),
                });
                continue;
            }
        };

        let currency = match fields[5].parse::<Currency>() {
            Ok(c) => c,
            Err(_) => {
                errors.push(RowError {
                    line: line_no,
                    kind: RowErrorKind::BadCurrency,
                    field: "Currency",
                    value: fields[5].clone(),
                });
                continue;
            }
        };

        let before = errors.len();
        let bitcoins = parse_decimal(&fields, 6, "Bitcoins", line_no, &mut errors)
            .and_then(|d| non_negative(d, "Bitcoins", line_no, &mut errors));
        let money = parse_decimal(&fields, 7, "Money", line_no, &mut errors)
            .and_then(|d| non_negative(d, "Money", line_no, &mut errors));
        let money_rate = parse_decimal(&fields, 8, "Money_Rate", line_no, &mut errors);
        let money_jpy = parse_decimal(&fields, 9, "Money_JPY", line_no, &mut errors)
            .and_then(|d| non_negative(d, "Money_JPY", line_no, &mut errors));
        let money_fee = parse_decimal(&fields, 10, "Money_Fee", line_no, &mut errors)
            .and_then(|d| non_negative(d, "Money_Fee", line_no, &mut errors));
        let money_fee_rate = parse_decimal(&fields, 11, "Money_Fee_Rate", line_no, &mut errors);
        // Money_Fee_JPY (12) and Bitcoin_Fee_JPY (14) are derived columns and
        // are validated but not retained.
        let _ = parse_decimal(&fields, 12, "Money_Fee_JPY", line_no, &mut errors);
        let bitcoin_fee = parse_decimal(&fields, 13, "Bitcoin_Fee", line_no, &mut errors)
            .and_then(|d| non_negative(d, "Bitcoin_Fee", line_no, &mut errors));
        let _ = parse_decimal(&fields, 14, "Bitcoin_Fee_JPY", line_no, &mut errors);
        if errors.len() > before {
            continue;
        }

        let rate_ok = |rate: Decimal, name: &'static str, errors: &mut Vec<RowError>| {
            if rate <= Decimal::ZERO {
                errors.push(RowError {
                    line: line_no,
                    kind: RowErrorKind::BadValue,
                    field: name,
                    value: rate.to_string(),
                });
                false
            } else {
                true
            }
        };
        let money_rate = money_rate.unwrap();
        let money_fee_rate = money_fee_rate.unwrap();
        if !rate_ok(money_rate, "Money_Rate", &mut errors)
            || !rate_ok(money_fee_rate, "Money_Fee_Rate", &mut errors)
        {
            continue;
        }

        let (user_country, user_state) = if ncols == 19 {
            let country = fields[17].trim();
            let state = fields[18].trim();
            (
                (!country.is_empty()).then(|| String::from(country)),
                (!state.is_empty()).then(|| String::from(state)),
            )
        } else {
            (None, None)
        };

        legs.push(Leg {
            trade_id,
            timestamp,
            user_id,
            side,
            currency,
            bitcoins: bitcoins.unwrap(),
            money: money.unwrap(),
            money_jpy: money_jpy.unwrap(),
            money_fee: money_fee.unwrap(),
            bitcoin_fee: bitcoin_fee.unwrap(),
            money_rate,
            money_fee_rate,
            japan,
            user_country,
            user_state,
            mc_kind: McKind::Standard,
            merged_count: 1,
            order_kind: None,
            aggressive: None,
            flags,
        });
    }

    // Propagate the multi-currency kind to every leg of flagged trades.
    if !mc_trades.is_empty() {
        for leg in &mut legs {
            if let Some(kind) = mc_trades.get(&leg.trade_id) {
                leg.mc_kind = *kind;
            }
        }
    }

    Ok(LeakedFile { legs, row_errors: errors })
}

/// Outcome of parsing the public aggregate file.
#[derive(Clone, Debug, Default)]
pub struct PublicFile {
    pub records: Vec<PublicTradeRecord>,
    pub row_errors: Vec<RowError>,
}

/// Parse the public aggregate trade file.
pub fn parse_public_file(input: &str) -> Result<PublicFile, ParseError> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or(ParseError::MissingHeader)?;
    let mut fields: Vec<String> = Vec::new();
    split_csv_line(header, &mut fields);
    let header_ok = fields.len() == PUBLIC_COLUMNS.len()
        && fields
            .iter()
            .zip(PUBLIC_COLUMNS.iter())
            .all(|(got, want)| got.eq_ignore_ascii_case(want));
    if !header_ok {
        return Err(ParseError::UnknownColumnSet {
            expected: PUBLIC_COLUMNS.to_vec(),
            found: String::from(header.trim()),
        });
    }

    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (line_idx, line) in lines {
        let line_no = line_idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        split_csv_line(line, &mut fields);
        if fields.len() != PUBLIC_COLUMNS.len() {
            errors.push(RowError {
                line: line_no,
                kind: RowErrorKind::WrongFieldCount,
                field: "row",
                value: String::from(line),
            });
            continue;
        }
        let currency = match fields[1].parse::<Currency>() {
            Ok(c) => c,
            Err(_) => {
                errors.push(RowError {
                    line: line_no,
                    kind: RowErrorKind::BadCurrency,
                    field: "Currency",
                    value: fields[1].clone(),
                });
                continue;
            }
        };
        let before = errors.len();
        let amount = parse_decimal(&fields, 2, "Amount", line_no, &mut errors);
        let price = parse_decimal(&fields, 3, "Price", line_no, &mut errors);
        if errors.len() > before {
            continue;
        }
        let price = price.unwrap();
        if price <= Decimal::ZERO {
            errors.push(RowError {
                line: line_no,
                kind: RowErrorKind::BadValue,
                field: "Price",
                value: price.to_string(),
            });
            continue;
        }
        let order_kind = match OrderKind::parse(&fields[4]) {
            Some(k) => k,
            None => {
                errors.push(RowError {
                    line: line_no,
                    kind: RowErrorKind::BadEnumValue,
                    field: "Order_Kind",
                    value: fields[4].clone(),
                });
                continue;
            }
        };
        let initiator = match fields[5].trim().to_ascii_lowercase().as_str() {
            "bid" => Initiator::Bid,
            "ask" => Initiator::Ask,
            _ => {
                errors.push(RowError {
                    line: line_no,
                    kind: RowErrorKind::BadEnumValue,
                    field: "Initiator",
                    value: fields[5].clone(),
                });
                continue;
            }
        };
        records.push(PublicTradeRecord {
            trade_id: fields[0].clone(),
            currency,
            amount: amount.unwrap(),
            price,
            order_kind,
            initiator,
        });
    }

    Ok(PublicFile { records, row_errors: errors })
}

#[derive(Clone, Debug)]
pub enum RateFileError {
    MissingHeader,
    BadRow { line: usize, value: String },
    NonPositiveRate { line: usize, value: String },
    DuplicateHour { line: usize, hour: Timestamp },
}

impl fmt::Display for RateFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFileError::MissingHeader => f.write_str("rate file has no header row"),
            RateFileError::BadRow { line, value } => {
                write!(f, "line {line}: malformed rate row ({value:?})")
            }
            RateFileError::NonPositiveRate { line, value } => {
                write!(f, "line {line}: non-positive open price ({value:?})")
            }
            RateFileError::DuplicateHour { line, hour } => {
                write!(f, "line {line}: duplicate hour {hour}")
            }
        }
    }
}

/// Parse an hourly OHLC rate file for one oriented currency pair.
///
/// Expected layout: `Hour,Open,High,Low,Close` (extra trailing columns such
/// as volume are ignored). Only the open is retained; hours must be unique
/// and opens strictly positive. These are market-data integrity conditions,
/// so violations are fatal rather than row-collected.
pub fn parse_rate_file(input: &str, pair: CurrencyPair) -> Result<Vec<RateBar>, RateFileError> {
    let mut lines = input.lines().enumerate();
    let _header = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or(RateFileError::MissingHeader)?;

    let mut bars: Vec<RateBar> = Vec::new();
    let mut seen: HashSet<i64> = HashSet::new();
    let mut fields: Vec<String> = Vec::new();
    for (line_idx, line) in lines {
        let line_no = line_idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        split_csv_line(line, &mut fields);
        if fields.len() < 2 {
            return Err(RateFileError::BadRow { line: line_no, value: String::from(line) });
        }
        let hour = Timestamp::parse(&fields[0])
            .map_err(|_| RateFileError::BadRow { line: line_no, value: fields[0].clone() })?
            .hour_floor();
        let open = Decimal::from_str(fields[1].trim())
            .map_err(|_| RateFileError::BadRow { line: line_no, value: fields[1].clone() })?;
        if open <= Decimal::ZERO {
            return Err(RateFileError::NonPositiveRate { line: line_no, value: fields[1].clone() });
        }
        if !seen.insert(hour.unix()) {
            return Err(RateFileError::DuplicateHour { line: line_no, hour });
        }
        bars.push(RateBar { pair, hour, open });
    }
    Ok(bars)
}

/// Decode the execution instant embedded in a trade identifier.
///
/// From late June 2011 on, identifiers are the concatenation of a ten-digit
/// POSIX timestamp and a six-digit microsecond part. Earlier identifiers are
/// short sequential integers and carry no instant; those (and anything else
/// that does not fit the pattern) decode to `None`. Total function, no errors.
pub fn decode_trade_id_time(trade_id: &str) -> Option<(Timestamp, u32)> {
    let t = trade_id.trim();
    if t.len() != 16 || !t.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let secs: i64 = t[..10].parse().ok()?;
    let micros: u32 = t[10..].parse().ok()?;
    // The epoch-style scheme starts on 26 June 2011; earlier 16-digit values
    // cannot occur, and anything decoding before that point is not an instant.
    const SCHEME_START: i64 = 1_309_046_400; // 2011-06-26 00:00:00 UTC
    if secs < SCHEME_START {
        return None;
    }
    Some((Timestamp::from_unix(secs), micros))
}
