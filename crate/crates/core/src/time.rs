//! Hour-resolution UTC timestamps.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Whole hours since the Unix epoch, UTC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hour(pub i64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TimestampError {
    #[error("unrecognised timestamp '{0}'")]
    Unrecognised(String),
    #[error("timestamp '{0}' is not on a whole hour")]
    NotWholeHour(String),
}

const NAIVE_FORMATS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
];

impl Hour {
    pub fn from_ymdh(year: i32, month: u32, day: u32, hour: u32) -> Option<Self> {
        let dt = NaiveDate::from_ymd_opt(year, month, day)?.and_hms_opt(hour, 0, 0)?;
        Some(Self::from_naive(dt))
    }

    fn from_naive(dt: NaiveDateTime) -> Self {
        Hour(dt.and_utc().timestamp().div_euclid(3600))
    }

    /// Hour of day, 0..24.
    pub fn hour_of_day(self) -> u8 {
        self.0.rem_euclid(24) as u8
    }

    pub fn offset(self, hours: i64) -> Self {
        Hour(self.0 + hours)
    }

    pub fn to_datetime(self) -> NaiveDateTime {
        DateTime::from_timestamp(self.0 * 3600, 0)
            .expect("hour index within chrono range")
            .naive_utc()
    }

    /// Parses ISO-8601 at hour resolution. Offsets are converted to UTC,
    /// naive values are taken as UTC, and a bare date means midnight.
    pub fn parse(s: &str) -> Result<Self, TimestampError> {
        let s = s.trim();
        let dt = if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
            dt.naive_utc()
        } else if let Some(dt) = NAIVE_FORMATS
            .iter()
            .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        {
            dt
        } else if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            d.and_hms_opt(0, 0, 0).expect("midnight")
        } else {
            return Err(TimestampError::Unrecognised(s.to_string()));
        };
        if dt.minute() != 0 || dt.second() != 0 || dt.nanosecond() != 0 {
            return Err(TimestampError::NotWholeHour(s.to_string()));
        }
        Ok(Self::from_naive(dt))
    }
}

impl fmt::Display for Hour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_datetime().format("%Y-%m-%dT%H:00:00Z"))
    }
}

impl FromStr for Hour {
    type Err = TimestampError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Hour::parse(s)
    }
}

impl Serialize for Hour {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Hour {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Hour::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        let a = Hour::parse("2013-06-01T05:00:00Z").unwrap();
        let b = Hour::parse("2013-06-01T05:00").unwrap();
        let c = Hour::parse("2013-06-01 05:00:00").unwrap();
        let d = Hour::parse("2013-06-01T07:00:00+02:00").unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert_eq!(a, d);
        assert_eq!(a.hour_of_day(), 5);
        assert_eq!(a.to_string(), "2013-06-01T05:00:00Z");
    }

    #[test]
    fn rejects_sub_hour() {
        assert!(matches!(
            Hour::parse("2013-06-01T05:30:00Z"),
            Err(TimestampError::NotWholeHour(_))
        ));
        assert!(Hour::parse("yesterday").is_err());
    }

    #[test]
    fn bare_date_is_midnight() {
        let h = Hour::parse("2013-06-02").unwrap();
        assert_eq!(h.hour_of_day(), 0);
        assert_eq!(h, Hour::from_ymdh(2013, 6, 2, 0).unwrap());
    }

    #[test]
    fn pre_epoch_hour_of_day() {
        let h = Hour::from_ymdh(1969, 12, 31, 23).unwrap();
        assert_eq!(h.0, -1);
        assert_eq!(h.hour_of_day(), 23);
    }
}
