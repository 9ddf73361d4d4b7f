//! Simulated time in integer microseconds.

use std::fmt;
use std::ops::{Add, Sub};

/// A point on the simulated clock, in microseconds since the start of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_ms(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    /// Rounds to the nearest microsecond; negative input clamps to zero.
    pub fn from_ms_f64(ms: f64) -> Self {
        SimTime((ms * 1_000.0).round().max(0.0) as u64)
    }

    pub fn from_secs_f64(s: f64) -> Self {
        Self::from_ms_f64(s * 1_000.0)
    }

    pub fn as_us(self) -> u64 {
        self.0
    }

    pub fn as_ms(self) -> f64 {
        self.0 as f64 / 1_000.0
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / 1_000_000.0
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}", self.0 / 1_000, self.0 % 1_000)
    }
}

/// Start time of tick `index` on a grid of `rate_hz` ticks per second.
///
/// Computed from the index rather than accumulated, so the grid never drifts:
/// at 60 Hz consecutive ticks are 16_666 or 16_667 us apart.
pub fn grid_time(index: u64, rate_hz: f64) -> SimTime {
    SimTime((index as f64 * 1_000_000.0 / rate_hz).floor() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_does_not_drift() {
        assert_eq!(grid_time(60, 60.0), SimTime(1_000_000));
        assert_eq!(grid_time(6000, 60.0), SimTime(100_000_000));
        let d = grid_time(1, 60.0).0;
        assert!(d == 16_666 || d == 16_667);
    }

    #[test]
    fn display_is_milliseconds() {
        assert_eq!(SimTime(16_667).to_string(), "16.667");
        assert_eq!(SimTime::from_ms(5).to_string(), "5.000");
    }
}
