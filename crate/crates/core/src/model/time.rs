use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;
use std::time::Duration;

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, Timelike, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A UTC instant with millisecond precision, stored as milliseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const EPOCH: Timestamp = Timestamp(0);
    /// Watermark value used to flush every pane at end of input.
    pub const MAX: Timestamp = Timestamp(i64::MAX);
    pub const MIN: Timestamp = Timestamp(i64::MIN);

    pub const fn from_millis(ms: i64) -> Self {
        Timestamp(ms)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    pub fn saturating_add(self, span: Span) -> Self {
        Timestamp(self.0.saturating_add(span.0))
    }

    pub fn saturating_sub(self, span: Span) -> Self {
        Timestamp(self.0.saturating_sub(span.0))
    }

    /// Signed distance `self - earlier` in milliseconds.
    pub fn millis_since(self, earlier: Timestamp) -> i64 {
        self.0.saturating_sub(earlier.0)
    }

    pub fn hour_of_day(self) -> Option<u32> {
        DateTime::<Utc>::from_timestamp_millis(self.0).map(|d| d.hour())
    }

    /// `2015-05-07T11:35:00.000Z`
    pub fn to_iso(self) -> String {
        match DateTime::<Utc>::from_timestamp_millis(self.0) {
            Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Millis, true),
            None => self.0.to_string(),
        }
    }

    pub fn parse_iso(s: &str) -> Option<Self> {
        DateTime::parse_from_rfc3339(s.trim())
            .ok()
            .map(|d| Timestamp(d.with_timezone(&Utc).timestamp_millis()))
    }

    /// Tries each format in order; returns the first successful parse.
    pub fn parse_with(s: &str, formats: &[TimeFormat]) -> Option<Self> {
        formats.iter().find_map(|f| f.parse(s))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_iso())
    }
}

impl FromStr for Timestamp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Timestamp::parse_iso(s).ok_or_else(|| format!("invalid RFC 3339 timestamp `{s}`"))
    }
}

impl Add<Span> for Timestamp {
    type Output = Timestamp;
    fn add(self, rhs: Span) -> Timestamp {
        self.saturating_add(rhs)
    }
}

impl Sub<Span> for Timestamp {
    type Output = Timestamp;
    fn sub(self, rhs: Span) -> Timestamp {
        self.saturating_sub(rhs)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_iso())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A non-negative length of time in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Span(i64);

impl Span {
    pub const ZERO: Span = Span(0);

    pub const fn from_millis(ms: i64) -> Self {
        Span(if ms < 0 { 0 } else { ms })
    }

    pub const fn from_secs(s: i64) -> Self {
        Span::from_millis(s * 1000)
    }

    pub const fn from_mins(m: i64) -> Self {
        Span::from_millis(m * 60_000)
    }

    pub const fn from_hours(h: i64) -> Self {
        Span::from_millis(h * 3_600_000)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 == 0 {
            return f.write_str("0s");
        }
        let d = Duration::from_millis(self.0 as u64);
        write!(f, "{}", humantime::format_duration(d))
    }
}

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let d = humantime::parse_duration(s.trim()).map_err(|e| format!("invalid duration `{s}`: {e}"))?;
        if d.subsec_nanos() % 1_000_000 != 0 {
            return Err(format!("duration `{s}` is finer than millisecond precision"));
        }
        i64::try_from(d.as_millis())
            .map(Span)
            .map_err(|_| format!("duration `{s}` is out of range"))
    }
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How a textual timestamp is decoded.
///
/// `rfc3339`, `epoch_s` and `epoch_ms` are named formats; anything else is a
/// strftime-style pattern. Patterns without an offset are read as UTC, and a
/// date-only pattern yields midnight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimeFormat {
    Rfc3339,
    EpochSeconds,
    EpochMillis,
    Pattern(String),
}

impl TimeFormat {
    pub fn defaults() -> Vec<TimeFormat> {
        vec![
            TimeFormat::Rfc3339,
            TimeFormat::Pattern("%Y-%m-%d %H:%M:%S%.f".into()),
            TimeFormat::Pattern("%Y-%m-%dT%H:%M:%S%.f".into()),
        ]
    }

    pub fn parse(&self, raw: &str) -> Option<Timestamp> {
        let s = raw.trim();
        if s.is_empty() {
            return None;
        }
        match self {
            TimeFormat::Rfc3339 => Timestamp::parse_iso(s),
            TimeFormat::EpochSeconds => {
                if let Ok(secs) = s.parse::<i64>() {
                    return secs.checked_mul(1000).map(Timestamp);
                }
                let secs: f64 = s.parse().ok()?;
                let ms = (secs * 1000.0).round();
                (ms.is_finite() && ms.abs() < 9.0e15).then_some(Timestamp(ms as i64))
            }
            TimeFormat::EpochMillis => s.parse::<i64>().ok().map(Timestamp),
            TimeFormat::Pattern(p) => {
                if let Ok(dt) = DateTime::parse_from_str(s, p) {
                    return Some(Timestamp(dt.with_timezone(&Utc).timestamp_millis()));
                }
                if let Ok(naive) = NaiveDateTime::parse_from_str(s, p) {
                    return Some(Timestamp(naive.and_utc().timestamp_millis()));
                }
                NaiveDate::parse_from_str(s, p)
                    .ok()
                    .and_then(|d| d.and_hms_opt(0, 0, 0))
                    .map(|n| Timestamp(n.and_utc().timestamp_millis()))
            }
        }
    }

    fn name(&self) -> &str {
        match self {
            TimeFormat::Rfc3339 => "rfc3339",
            TimeFormat::EpochSeconds => "epoch_s",
            TimeFormat::EpochMillis => "epoch_ms",
            TimeFormat::Pattern(p) => p,
        }
    }
}

impl From<&str> for TimeFormat {
    fn from(s: &str) -> Self {
        match s {
            "rfc3339" | "iso8601" => TimeFormat::Rfc3339,
            "epoch_s" => TimeFormat::EpochSeconds,
            "epoch_ms" => TimeFormat::EpochMillis,
            other => TimeFormat::Pattern(other.to_string()),
        }
    }
}

impl Serialize for TimeFormat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for TimeFormat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(TimeFormat::from(s.as_str()))
    }
}
