use chrono::Months;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ProjectStore;
use crate::timewin::{Timestamp, Window};

/// Accepted response-window lengths in months.
pub const RESPONSE_MONTHS: [u32; 3] = [3, 6, 12];

/// Months of history required beyond the response window.
const MIN_OBSERVATION_MONTHS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSplit {
    /// `[data_start, t_split)`.
    pub observation: Window,
    /// `[t_split, data_end]`.
    pub response: Window,
    pub response_months: u32,
}

impl TimeSplit {
    pub fn t_split(&self) -> Timestamp {
        self.response.start
    }
}

/// Split of a store's full time span.
pub fn make_split(store: &ProjectStore, response_months: u32) -> Result<TimeSplit> {
    let (start, end) = store.time_span().ok_or_else(|| Error::InsufficientHistory {
        project: store.project.to_string(),
        message: "store has no timestamped records".into(),
    })?;
    make_split_between(&store.project.to_string(), start, end, response_months)
}

pub fn make_split_between(project: &str, start: Timestamp, end: Timestamp, response_months: u32) -> Result<TimeSplit> {
    if !RESPONSE_MONTHS.contains(&response_months) {
        return Err(Error::Config(format!(
            "response_months must be one of 3, 6 or 12, got {response_months}"
        )));
    }
    let insufficient = |message: String| Error::InsufficientHistory {
        project: project.to_string(),
        message,
    };
    let t_split = end
        .checked_sub_months(Months::new(response_months))
        .ok_or_else(|| insufficient("date arithmetic out of range".into()))?;
    let needed = start
        .checked_add_months(Months::new(response_months + MIN_OBSERVATION_MONTHS))
        .ok_or_else(|| insufficient("date arithmetic out of range".into()))?;
    if needed > end {
        return Err(insufficient(format!(
            "history {start}..{end} is shorter than {} months",
            response_months + MIN_OBSERVATION_MONTHS
        )));
    }
    Ok(TimeSplit {
        observation: Window::half_open(start, t_split),
        response: Window::closed(t_split, end),
        response_months,
    })
}
