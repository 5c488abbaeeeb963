//! Time windows over UTC timestamps.

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Timestamp = DateTime<Utc>;

/// `[start, end)`, or `[start, end]` when `closed_end` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: Timestamp,
    pub end: Timestamp,
    #[serde(default)]
    pub closed_end: bool,
}

impl Window {
    pub fn half_open(start: Timestamp, end: Timestamp) -> Self {
        Window {
            start,
            end,
            closed_end: false,
        }
    }

    pub fn closed(start: Timestamp, end: Timestamp) -> Self {
        Window {
            start,
            end,
            closed_end: true,
        }
    }

    /// Covers every representable instant.
    pub fn all() -> Self {
        Window::closed(DateTime::<Utc>::MIN_UTC, DateTime::<Utc>::MAX_UTC)
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        t >= self.start && (t < self.end || (self.closed_end && t == self.end))
    }

    pub fn is_empty(&self) -> bool {
        if self.closed_end {
            self.end < self.start
        } else {
            self.end <= self.start
        }
    }

    /// Parses `START..END` where each side is an RFC 3339 timestamp or a
    /// `YYYY-MM-DD` date (midnight UTC). Either side may be omitted.
    pub fn parse(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| Error::InvalidWindow(s.to_string()))?;
        let start = if a.trim().is_empty() {
            DateTime::<Utc>::MIN_UTC
        } else {
            parse_instant(a.trim()).ok_or_else(|| Error::InvalidWindow(s.to_string()))?
        };
        let end = if b.trim().is_empty() {
            return Ok(Window::closed(start, DateTime::<Utc>::MAX_UTC));
        } else {
            parse_instant(b.trim()).ok_or_else(|| Error::InvalidWindow(s.to_string()))?
        };
        let w = Window::half_open(start, end);
        if w.is_empty() {
            return Err(Error::InvalidWindow(s.to_string()));
        }
        Ok(w)
    }
}

pub fn parse_instant(s: &str) -> Option<Timestamp> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc())
}
