//! Fiat currencies and currency pairs.

use core::fmt;
use core::str::FromStr;

use alloc::string::String;

/// The seventeen fiat currencies that ever appear in the trade log.
/// Any other code is a parse error, never a pass-through.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Currency {
    Aud,
    Cad,
    Chf,
    Cny,
    Dkk,
    Eur,
    Gbp,
    Hkd,
    Jpy,
    Nok,
    Nzd,
    Pln,
    Rub,
    Sek,
    Sgd,
    Thb,
    Usd,
}

impl Currency {
    pub const ALL: [Currency; 17] = [
        Currency::Aud,
        Currency::Cad,
        Currency::Chf,
        Currency::Cny,
        Currency::Dkk,
        Currency::Eur,
        Currency::Gbp,
        Currency::Hkd,
        Currency::Jpy,
        Currency::Nok,
        Currency::Nzd,
        Currency::Pln,
        Currency::Rub,
        Currency::Sek,
        Currency::Sgd,
        Currency::Thb,
        Currency::Usd,
    ];

    pub const fn code(self) -> &'static str {
        match self {
            Currency::Aud => "AUD",
            Currency::Cad => "CAD",
            Currency::Chf => "CHF",
            Currency::Cny => "CNY",
            Currency::Dkk => "DKK",
            Currency::Eur => "EUR",
            Currency::Gbp => "GBP",
            Currency::Hkd => "HKD",
            Currency::Jpy => "JPY",
            Currency::Nok => "NOK",
            Currency::Nzd => "NZD",
            Currency::Pln => "PLN",
            Currency::Rub => "RUB",
            Currency::Sek => "SEK",
            Currency::Sgd => "SGD",
            Currency::Thb => "THB",
            Currency::Usd => "USD",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnknownCurrency(pub String);

impl fmt::Display for UnknownCurrency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown currency code: {:?}", self.0)
    }
}

impl FromStr for Currency {
    type Err = UnknownCurrency;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        Currency::ALL
            .iter()
            .copied()
            .find(|c| c.code().eq_ignore_ascii_case(t))
            .ok_or_else(|| UnknownCurrency(String::from(t)))
    }
}

impl fmt::Display for Currency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// An oriented currency pair: `quote` units per one `base` unit.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct CurrencyPair {
    pub base: Currency,
    pub quote: Currency,
}

impl CurrencyPair {
    pub const fn new(base: Currency, quote: Currency) -> Self {
        CurrencyPair { base, quote }
    }

    pub const fn reversed(self) -> Self {
        CurrencyPair { base: self.quote, quote: self.base }
    }
}

impl fmt::Display for CurrencyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.base, self.quote)
    }
}

/// The unordered pair of fiat currencies an arbitrage action trades across.
/// Canonical form keeps the codes in alphabetical order, so (EUR, USD) and
/// (USD, EUR) name the same market.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Dyad {
    first: Currency,
    second: Currency,
}

impl Dyad {
    pub fn new(a: Currency, b: Currency) -> Self {
        if a.code() <= b.code() {
            Dyad { first: a, second: b }
        } else {
            Dyad { first: b, second: a }
        }
    }

    pub const fn first(self) -> Currency {
        self.first
    }

    pub const fn second(self) -> Currency {
        self.second
    }
}

impl fmt::Display for Dyad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.first, self.second)
    }
}

impl FromStr for Dyad {
    type Err = UnknownCurrency;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once('/')
            .ok_or_else(|| UnknownCurrency(String::from(s)))?;
        Ok(Dyad::new(a.parse()?, b.parse()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_codes() {
        for c in Currency::ALL {
            assert_eq!(c.code().parse::<Currency>().unwrap(), c);
        }
        assert!("XBT".parse::<Currency>().is_err());
    }

    #[test]
    fn dyad_is_orientation_free() {
        let a = Dyad::new(Currency::Usd, Currency::Eur);
        let b = Dyad::new(Currency::Eur, Currency::Usd);
        assert_eq!(a, b);
        assert_eq!(a.to_string(), "EUR/USD");
        assert_eq!("USD/EUR".parse::<Dyad>().unwrap(), a);
    }
}
