//! Closed real intervals.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A closed interval [lo, hi] with lo <= hi.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(Error::EmptyInterval { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-12 * (1.0 + t.abs().max(self.lo.abs()).max(self.hi.abs()));
        t >= self.lo - slack && t <= self.hi + slack
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.contains(other.lo) && self.contains(other.hi)
    }

    /// Intersection, or an error if the intervals are disjoint.
    pub fn intersect(&self, other: &Interval) -> Result<Interval> {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }
}
