//! UTC timestamps at second resolution.
//!
//! The trade logs carry wall-clock dates in `YYYY-MM-DD hh:mm:ss` form and
//! everything downstream works on whole seconds, hours, and days, so a thin
//! wrapper over Unix seconds is all that is needed. Calendar conversion uses
//! the proleptic Gregorian civil-day algorithms.

use core::fmt;

use alloc::string::String;

pub const SECS_PER_MINUTE: i64 = 60;
pub const SECS_PER_HOUR: i64 = 3_600;
pub const SECS_PER_DAY: i64 = 86_400;

/// A UTC instant with second resolution, stored as Unix seconds.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Timestamp(i64);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TimeError {
    /// The text does not match any accepted date layout.
    BadFormat(String),
    /// Syntactically valid but out of calendar range (e.g. month 13).
    OutOfRange(String),
}

impl fmt::Display for TimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeError::BadFormat(s) => write!(f, "unrecognized date format: {s:?}"),
            TimeError::OutOfRange(s) => write!(f, "date out of range: {s:?}"),
        }
    }
}

/// Days since 1970-01-01 for a civil date (proleptic Gregorian).
fn days_from_civil(year: i64, month: u32, day: u32) -> i64 {
    let y = if month <= 2 { year - 1 } else { year };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400; // [0, 399]
    let mp = ((month + 9) % 12) as i64; // March = 0
    let doy = (153 * mp + 2) / 5 + day as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

/// Civil date for days since 1970-01-01. Inverse of [`days_from_civil`].
fn civil_from_days(days: i64) -> (i64, u32, u32) {
    let z = days + 719_468;
    let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
    let doe = z - era * 146_097; // [0, 146096]
    let yoe = (doe - doe / 1_460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}

fn days_in_month(year: i64, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if (year % 4 == 0 && year % 100 != 0) || year % 400 == 0 {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}

impl Timestamp {
    pub const fn from_unix(secs: i64) -> Self {
        Timestamp(secs)
    }

    pub const fn unix(self) -> i64 {
        self.0
    }

    /// Build from calendar components, validating ranges.
    pub fn from_ymd_hms(
        year: i64,
        month: u32,
        day: u32,
        hour: u32,
        minute: u32,
        second: u32,
    ) -> Option<Self> {
        if !(1..=12).contains(&month)
            || day == 0
            || day > days_in_month(year, month)
            || hour > 23
            || minute > 59
            || second > 59
        {
            return None;
        }
        let days = days_from_civil(year, month, day);
        Some(Timestamp(
            days * SECS_PER_DAY
                + hour as i64 * SECS_PER_HOUR
                + minute as i64 * SECS_PER_MINUTE
                + second as i64,
        ))
    }

    /// Parse a UTC date-time.
    ///
    /// Accepted layouts: `YYYY-MM-DD hh:mm:ss`, `YYYY-MM-DD hh:mm`,
    /// two-digit-year variants (`YY-MM-DD ...`, mapped to 20YY), an optional
    /// `T` separator with optional trailing `Z`, and a bare `YYYY-MM-DD`
    /// (midnight).
    pub fn parse(s: &str) -> Result<Self, TimeError> {
        let s = s.trim();
        let bad = || TimeError::BadFormat(String::from(s));
        let body = s.strip_suffix('Z').unwrap_or(s);
        let (date_part, time_part) = match body.find(['T', ' ']) {
            Some(pos) => (&body[..pos], Some(body[pos + 1..].trim())),
            None => (body, None),
        };

        let mut it = date_part.split('-');
        let year_str = it.next().ok_or_else(bad)?;
        let month_str = it.next().ok_or_else(bad)?;
        let day_str = it.next().ok_or_else(bad)?;
        if it.next().is_some() {
            return Err(bad());
        }
        let mut year: i64 = year_str.parse().map_err(|_| bad())?;
        if year_str.len() == 2 {
            year += 2000;
        }
        let month: u32 = month_str.parse().map_err(|_| bad())?;
        let day: u32 = day_str.parse().map_err(|_| bad())?;

        let (hour, minute, second) = match time_part {
            None | Some("") => (0, 0, 0),
            Some(t) => {
                let mut parts = t.split(':');
                let h: u32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                let m: u32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                let sec: u32 = match parts.next() {
                    Some(p) => p.parse().map_err(|_| bad())?,
                    None => 0,
                };
                if parts.next().is_some() {
                    return Err(bad());
                }
                (h, m, sec)
            }
        };

        Timestamp::from_ymd_hms(year, month, day, hour, minute, second)
            .ok_or_else(|| TimeError::OutOfRange(String::from(s)))
    }

    /// Truncate to the start of the UTC hour.
    pub fn hour_floor(self) -> Timestamp {
        Timestamp(self.0.div_euclid(SECS_PER_HOUR) * SECS_PER_HOUR)
    }

    /// Truncate to the start of the UTC day.
    pub fn day_floor(self) -> Timestamp {
        Timestamp(self.0.div_euclid(SECS_PER_DAY) * SECS_PER_DAY)
    }

    /// Hour index since the epoch (floor).
    pub fn hour_index(self) -> i64 {
        self.0.div_euclid(SECS_PER_HOUR)
    }

    /// Day index since the epoch (floor).
    pub fn day_index(self) -> i64 {
        self.0.div_euclid(SECS_PER_DAY)
    }

    pub fn ymd(self) -> (i64, u32, u32) {
        civil_from_days(self.0.div_euclid(SECS_PER_DAY))
    }

    pub fn hms(self) -> (u32, u32, u32) {
        let sod = self.0.rem_euclid(SECS_PER_DAY);
        (
            (sod / SECS_PER_HOUR) as u32,
            ((sod % SECS_PER_HOUR) / SECS_PER_MINUTE) as u32,
            (sod % SECS_PER_MINUTE) as u32,
        )
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (y, mo, d) = self.ymd();
        let (h, mi, s) = self.hms();
        write!(f, "{y:04}-{mo:02}-{d:02} {h:02}:{mi:02}:{s:02}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epoch_is_1970() {
        let t = Timestamp::from_ymd_hms(1970, 1, 1, 0, 0, 0).unwrap();
        assert_eq!(t.unix(), 0);
    }

    #[test]
    fn known_instant() {
        // 2012-01-01T00:00:00Z is a well-known epoch value.
        let t = Timestamp::from_ymd_hms(2012, 1, 1, 0, 0, 0).unwrap();
        assert_eq!(t.unix(), 1_325_376_000);
    }

    #[test]
    fn parse_formats() {
        let full = Timestamp::parse("2011-04-04 14:23:05").unwrap();
        assert_eq!(full.to_string(), "2011-04-04 14:23:05");
        // Two-digit year and missing seconds, as printed in the raw logs.
        let short = Timestamp::parse("11-04-04 14:23").unwrap();
        assert_eq!(short.to_string(), "2011-04-04 14:23:00");
        let iso = Timestamp::parse("2013-04-01T00:00:00Z").unwrap();
        assert_eq!(iso.to_string(), "2013-04-01 00:00:00");
        let date_only = Timestamp::parse("2013-09-12").unwrap();
        assert_eq!(date_only.to_string(), "2013-09-12 00:00:00");
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(Timestamp::parse("not a date").is_err());
        assert!(Timestamp::parse("2011-13-01 00:00:00").is_err());
        assert!(Timestamp::parse("2011-02-29 00:00:00").is_err());
        assert!(Timestamp::parse("2011-01-01 24:00:00").is_err());
    }

    #[test]
    fn floors() {
        let t = Timestamp::parse("2012-10-27 14:59:59").unwrap();
        assert_eq!(t.hour_floor().to_string(), "2012-10-27 14:00:00");
        assert_eq!(t.day_floor().to_string(), "2012-10-27 00:00:00");
    }

    #[test]
    fn roundtrip_through_civil() {
        for &secs in &[0_i64, 1_301_617_380, 1_325_376_000, 1_385_856_000, -86_400] {
            let t = Timestamp::from_unix(secs);
            let (y, m, d) = t.ymd();
            let (h, mi, s) = t.hms();
            assert_eq!(Timestamp::from_ymd_hms(y, m, d, h, mi, s).unwrap(), t);
        }
    }
}
