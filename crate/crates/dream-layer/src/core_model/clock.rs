//! Virtual time in whole days with an optional sub-day fraction.
//!
//! All durations in the pool and dream store ("cooling 7 days", "half-life 6
//! days") are expressed on this clock; the sub-day fraction only matters for
//! rate-limit back-off.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A point in virtual time: non-negative whole days since epoch plus a
/// fraction in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timestamp {
    pub day: u64,
    #[serde(default)]
    pub frac: f64,
}

impl Timestamp {
    pub fn from_day(day: u64) -> Self {
        Timestamp { day, frac: 0.0 }
    }

    pub fn new(day: u64, frac: f64) -> Self {
        debug_assert!((0.0..1.0).contains(&frac), "frac out of [0,1)");
        Timestamp { day, frac }
    }

    pub fn add_days(self, days: u64) -> Self {
        Timestamp {
            day: self.day + days,
            frac: self.frac,
        }
    }

    /// Adds a possibly fractional number of days, carrying into whole days.
    /// The fraction is accumulated separately from the day count so small
    /// delays keep full precision.
    pub fn add_frac_days(self, days: f64) -> Self {
        debug_assert!(days >= 0.0);
        let frac = self.frac + days;
        let carry = frac.floor();
        Timestamp {
            day: self.day + carry as u64,
            frac: frac - carry,
        }
    }

    /// Signed distance in days from `earlier` to `self`.
    pub fn days_since(self, earlier: Timestamp) -> f64 {
        (self.day as f64 + self.frac) - (earlier.day as f64 + earlier.frac)
    }
}

impl Eq for Timestamp {}

impl Ord for Timestamp {
    fn cmp(&self, other: &Self) -> Ordering {
        self.day
            .cmp(&other.day)
            // frac is finite and in [0,1) by construction
            .then(self.frac.partial_cmp(&other.frac).unwrap_or(Ordering::Equal))
    }
}

impl PartialOrd for Timestamp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.frac == 0.0 {
            write!(f, "day {}", self.day)
        } else {
            write!(f, "day {}+{:.4}", self.day, self.frac)
        }
    }
}

/// Monotone virtual clock for a single engine run.
#[derive(Debug, Clone)]
pub struct SimClock {
    now: Timestamp,
}

impl SimClock {
    pub fn starting_at(now: Timestamp) -> Self {
        SimClock { now }
    }

    pub fn now(&self) -> Timestamp {
        self.now
    }

    /// Advances to `t`. Moving backwards is a programming error and panics.
    pub fn advance_to(&mut self, t: Timestamp) {
        assert!(t >= self.now, "virtual clock may not move backwards");
        self.now = t;
    }

    pub fn advance_days(&mut self, days: u64) {
        self.now = self.now.add_days(days);
    }
}

impl Default for SimClock {
    fn default() -> Self {
        SimClock::starting_at(Timestamp::from_day(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_uses_day_then_frac() {
        let a = Timestamp::new(3, 0.5);
        let b = Timestamp::new(3, 0.75);
        let c = Timestamp::from_day(4);
        assert!(a < b && b < c);
    }

    #[test]
    fn frac_carry() {
        let t = Timestamp::new(1, 0.75).add_frac_days(0.5);
        assert_eq!(t.day, 2);
        assert!((t.frac - 0.25).abs() < 1e-12);
    }

    #[test]
    #[should_panic]
    fn clock_is_monotone() {
        let mut clock = SimClock::starting_at(Timestamp::from_day(5));
        clock.advance_to(Timestamp::from_day(4));
    }
}
