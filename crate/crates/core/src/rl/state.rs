//! Agent observations built from recent network measurements.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::netsim::measure::NetMeasurement;

pub const FEATURES_PER_INTERVAL: usize = 4;

/// Values mapped to 1.0 by normalization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormBounds {
    pub throughput_bps: f64,
    pub latency_ms: f64,
    pub jitter_ms: f64,
}

impl NormBounds {
    pub fn validate(&self) -> Result<()> {
        if !(self.throughput_bps > 0.0 && self.latency_ms > 0.0 && self.jitter_ms > 0.0) {
            return Err(Error::domain("norm_bounds", "must be > 0"));
        }
        Ok(())
    }
}

/// Sliding window of the last `k` measurements plus the previous action.
///
/// Layout, oldest interval first: `[throughput, latency, jitter, loss] * k,
/// prev_action`, all scaled to `[0, 1]`. Slots not yet filled are zero. A
/// missing latency (nothing delivered) reads as the worst value.
#[derive(Clone, Debug)]
pub struct StateBuilder {
    k: usize,
    actions: usize,
    bounds: NormBounds,
    window: VecDeque<[f64; FEATURES_PER_INTERVAL]>,
    prev_action: usize,
}

impl StateBuilder {
    pub fn new(k: usize, actions: usize, bounds: NormBounds) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("history_k", "must be >= 1"));
        }
        if actions < 2 {
            return Err(Error::domain("actions", "need at least two actions"));
        }
        bounds.validate()?;
        Ok(StateBuilder {
            k,
            actions,
            bounds,
            window: VecDeque::with_capacity(k),
            prev_action: 0,
        })
    }

    pub fn dim(&self) -> usize {
        state_dim(self.k)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn clear(&mut self) {
        self.window.clear();
        self.prev_action = 0;
    }

    pub fn push(&mut self, m: &NetMeasurement) {
        let b = self.bounds;
        let unit = |x: f64| {
            if x.is_finite() {
                x.clamp(0.0, 1.0)
            } else {
                1.0
            }
        };
        let row = [
            unit(m.throughput_bps / b.throughput_bps),
            m.latency_ms.map_or(1.0, |l| unit(l / b.latency_ms)),
            m.jitter_ms.map_or(0.0, |j| unit(j / b.jitter_ms)),
            unit(m.loss_rate),
        ];
        if self.window.len() == self.k {
            self.window.pop_front();
        }
        self.window.push_back(row);
    }

    pub fn set_prev_action(&mut self, a: usize) {
        self.prev_action = a.min(self.actions - 1);
    }

    pub fn vector(&self) -> Vec<f64> {
        let mut v = vec![0.0; (self.k - self.window.len()) * FEATURES_PER_INTERVAL];
        for row in &self.window {
            v.extend_from_slice(row);
        }
        v.push(self.prev_action as f64 / (self.actions - 1) as f64);
        v
    }
}

pub fn state_dim(k: usize) -> usize {
    FEATURES_PER_INTERVAL * k + 1
}
