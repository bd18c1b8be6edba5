//! Observation quantity adjustment: the bounded observation queue and the rule
//! that decides how many of its newest entries still come from the current
//! observation distribution.

use std::collections::VecDeque;

use thiserror::Error;

use crate::world::Observation;

#[derive(Debug, Error, PartialEq)]
pub enum OqaError {
    #[error("accuracy trail needs at least two entries, has {0}")]
    InsufficientHistory(usize),
    #[error("invalid observation-quantity parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OqaParams {
    pub sensitivity: f64,
    pub window: usize,
    pub capacity: usize,
    pub observation_period: u64,
}

impl OqaParams {
    pub fn new(
        sensitivity: f64,
        window: usize,
        capacity: usize,
        observation_period: u64,
    ) -> Result<Self, OqaError> {
        if !(sensitivity >= 0.0 && sensitivity.is_finite()) {
            return Err(OqaError::InvalidParams(format!(
                "sensitivity must be finite and >= 0, got {sensitivity}"
            )));
        }
        if window == 0 || capacity == 0 || observation_period == 0 {
            return Err(OqaError::InvalidParams(
                "window, capacity and observation period must be >= 1".into(),
            ));
        }
        Ok(Self {
            sensitivity,
            window,
            capacity,
            observation_period,
        })
    }

    /// Step index from which the drift-based rule replaces the warm-up count.
    pub fn warm_up_end(&self) -> u64 {
        self.window as u64 * self.observation_period
    }
}

/// FIFO of binary observations, oldest first, evicting the oldest when full.
#[derive(Debug, Clone)]
pub struct ObservationQueue {
    values: VecDeque<bool>,
    capacity: usize,
}

impl ObservationQueue {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "queue capacity must be at least 1");
        Self {
            values: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, obs: Observation) {
        if self.values.len() == self.capacity {
            self.values.pop_front();
        }
        self.values.push_back(obs.black);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Values oldest first, `1` for black.
    pub fn values(&self) -> impl Iterator<Item = u8> + '_ {
        self.values.iter().map(|b| *b as u8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WindowCounts {
    pub black: usize,
    pub total: usize,
}

/// Black count among the newest `min(t, len)` observations.
pub fn window_counts(queue: &ObservationQueue, t: usize) -> WindowCounts {
    let total = t.min(queue.len());
    let black = queue.values.iter().rev().take(total).filter(|b| **b).count();
    WindowCounts { black, total }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeWeighting {
    /// Weight `j + 1` on the difference `j` entries old, normalized by the
    /// weight sum.
    #[default]
    Mirrored,
    /// Unweighted sum of differences divided by `1 + 2 + ... + W`.
    Literal,
}

/// Recent constrained accuracies, oldest first, with the sampling period used
/// to convert per-entry differences into per-step rates.
#[derive(Debug, Clone)]
pub struct AccuracyTrail {
    values: VecDeque<f64>,
    window: usize,
    period: u64,
}

impl AccuracyTrail {
    pub fn new(window: usize, period: u64) -> Self {
        assert!(window >= 1 && period >= 1);
        Self {
            values: VecDeque::with_capacity(window + 1),
            window,
            period,
        }
    }

    pub fn push(&mut self, b: f64) {
        if self.values.len() == self.window + 1 {
            self.values.pop_front();
        }
        self.values.push_back(b);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn window(&self) -> usize {
        self.window
    }
}

/// Smoothed degradation rate of the assumed accuracy, in accuracy units per
/// control step.
pub fn accuracy_derivative(
    trail: &AccuracyTrail,
    weighting: DerivativeWeighting,
) -> Result<f64, OqaError> {
    let len = trail.values.len();
    if len < 2 {
        return Err(OqaError::InsufficientHistory(len));
    }
    let w = trail.window.min(len - 1);
    // newest difference first
    let diffs = (0..w).map(|j| trail.values[len - 1 - j] - trail.values[len - 2 - j]);
    let norm = (w * (w + 1) / 2) as f64;
    let per_entry = match weighting {
        DerivativeWeighting::Mirrored => {
            diffs.enumerate().map(|(j, d)| (j + 1) as f64 * d).sum::<f64>() / norm
        }
        DerivativeWeighting::Literal => diffs.sum::<f64>() / norm,
    };
    Ok(per_entry / trail.period as f64)
}

/// Number of newest observations to use at step `k`.
///
/// During warm-up (`k < W T_obs`) this is the number of observations made so
/// far; afterwards `ceil(φ / |T_obs (2x' - 1) rate|)`. A zero denominator
/// yields the queue capacity. The result is always in `[1, Q_max]`.
pub fn adjusted_observation_count(params: &OqaParams, reference: f64, rate: f64, k: u64) -> usize {
    let cap = params.capacity;
    if k < params.warm_up_end() {
        let made = (k / params.observation_period) as usize;
        return made.clamp(1, cap);
    }
    let denom = (params.observation_period as f64 * (2.0 * reference - 1.0) * rate).abs();
    if !(denom > 0.0) {
        return cap;
    }
    let count = (params.sensitivity / denom).ceil();
    if !(count < cap as f64) {
        return cap;
    }
    (count as usize).max(1)
}
