//! Recent-return scaling of the entropy coefficient.
//!
//! The adaptive mode multiplies the configured entropy coefficient by
//! `g_recent`, the mean of the last `tau` per-update batch returns divided
//! by the largest return an episode can yield. An agent that is doing well
//! therefore explores more; one that is failing explores less.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{contract, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Fixed entropy coefficient.
    Standard,
    /// Entropy coefficient scaled by recent performance.
    Adaptive,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Standard => "standard",
            Mode::Adaptive => "adaptive",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Mode::Standard),
            "adaptive" => Ok(Mode::Adaptive),
            other => Err(contract(format!(
                "unknown algorithm {other:?}, expected \"standard\" or \"adaptive\""
            ))),
        }
    }
}

/// Sliding window over the most recent per-update mean returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnWindow {
    capacity: usize,
    g_max: f64,
    entries: VecDeque<f64>,
}

impl ReturnWindow {
    pub fn new(capacity: usize, g_max: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(contract("return window needs tau >= 1"));
        }
        if !(g_max > 0.0 && g_max.is_finite()) {
            return Err(contract(format!("g_max must be positive, got {g_max}")));
        }
        Ok(Self {
            capacity,
            g_max,
            entries: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn g_max(&self) -> f64 {
        self.g_max
    }

    pub fn entries(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends one batch mean, evicting the oldest entry once full.
    pub fn push_batch_return(&mut self, mean_return: f64) -> Result<()> {
        if !(0.0..=self.g_max).contains(&mean_return) {
            return Err(contract(format!(
                "batch return {mean_return} outside [0, {}]",
                self.g_max
            )));
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(mean_return);
        Ok(())
    }

    /// Mean of the stored entries over `g_max`, or 0 when empty.
    pub fn g_recent(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        let (lo, hi) = self
            .entries
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        // Rounding can push the float mean outside [lo, hi]; a constant window
        // must give back its value exactly.
        let mean = (self.entries.iter().sum::<f64>() / self.entries.len() as f64).clamp(lo, hi);
        (mean / self.g_max).clamp(0.0, 1.0)
    }
}

/// Entropy coefficient actually applied for one update.
pub fn effective_entropy_coef(mode: Mode, window: &ReturnWindow, c2_base: f64) -> Result<f64> {
    if !(c2_base >= 0.0 && c2_base.is_finite()) {
        return Err(contract(format!(
            "entropy coefficient must be >= 0, got {c2_base}"
        )));
    }
    Ok(match mode {
        Mode::Standard => c2_base,
        Mode::Adaptive => window.g_recent() * c2_base,
    })
}
