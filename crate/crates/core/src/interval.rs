use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid interval [{start}, {end}]: need 0 <= start < end <= 1")]
pub struct IntervalError {
    pub start: f64,
    pub end: f64,
}

/// A span of a track in relative time, `0 <= start < end <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInterval", into = "RawInterval")]
pub struct TimeInterval {
    start: f64,
    end: f64,
}

#[derive(Serialize, Deserialize)]
struct RawInterval {
    start: f64,
    end: f64,
}

impl TryFrom<RawInterval> for TimeInterval {
    type Error = IntervalError;

    fn try_from(raw: RawInterval) -> Result<Self, Self::Error> {
        TimeInterval::new(raw.start, raw.end)
    }
}

impl From<TimeInterval> for RawInterval {
    fn from(iv: TimeInterval) -> Self {
        RawInterval {
            start: iv.start,
            end: iv.end,
        }
    }
}

impl TimeInterval {
    pub fn new(start: f64, end: f64) -> Result<Self, IntervalError> {
        // NaN fails every comparison, so it lands in the error branch.
        if start >= 0.0 && start < end && end <= 1.0 {
            Ok(Self { start, end })
        } else {
            Err(IntervalError { start, end })
        }
    }

    /// The whole track, `[0, 1]`.
    pub const FULL: TimeInterval = TimeInterval {
        start: 0.0,
        end: 1.0,
    };

    /// Converts an absolute span in seconds to relative form.
    pub fn from_seconds(start_s: f64, end_s: f64, duration_s: f64) -> Result<Self, IntervalError> {
        let end = if end_s == duration_s {
            1.0
        } else {
            end_s / duration_s
        };
        Self::new(start_s / duration_s, end)
    }

    #[inline]
    pub fn start(&self) -> f64 {
        self.start
    }

    #[inline]
    pub fn end(&self) -> f64 {
        self.end
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.end - self.start
    }

    /// `true` when the two spans share a region of positive length.
    pub fn overlaps(&self, other: &TimeInterval) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}-{}",
            crate::captionfmt::format_percent(self.start),
            crate::captionfmt::format_percent(self.end)
        )
    }
}
