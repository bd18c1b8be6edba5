//! Fill-ratio estimation: local binomial MLE with a Fisher-information
//! confidence, confidence-weighted fusion of neighbor estimates, and the
//! weighted moving average of past informed estimates.

use std::collections::VecDeque;

use thiserror::Error;

/// Smallest distance above one half that an assumed accuracy may take when it
/// is fed into the local estimator.
pub const ACCURACY_GUARD: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum FreError {
    #[error("invalid counts n = {n}, t = {t}")]
    InvalidCounts { n: usize, t: usize },
    #[error("assumed accuracy {0} is singular for the local estimator (must be in (0.5, 1])")]
    Singular(f64),
    #[error("degenerate counts n = {n}, t = {t} on the interior confidence branch")]
    DegenerateCounts { n: usize, t: usize },
    #[error("weighted moving average requested on an empty history")]
    EmptyHistory,
}

/// Clamps an assumed accuracy into `[0.5 + ACCURACY_GUARD, 1.0]`.
pub fn guard_accuracy(b: f64) -> f64 {
    b.clamp(0.5 + ACCURACY_GUARD, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBelief {
    pub estimate: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SocialBelief {
    pub estimate: f64,
    pub confidence: f64,
}

impl SocialBelief {
    pub const EMPTY: SocialBelief = SocialBelief {
        estimate: 0.0,
        confidence: 0.0,
    };
}

fn check_inputs(n: usize, t: usize, b: f64) -> Result<(), FreError> {
    if t == 0 || n > t {
        return Err(FreError::InvalidCounts { n, t });
    }
    if !(b > 0.5 && b <= 1.0) {
        return Err(FreError::Singular(b));
    }
    Ok(())
}

/// Maximum-likelihood fill ratio from `n` black readings out of `t`, given
/// assumed accuracy `b_prev`. The unconstrained solution
/// `(n/t + b - 1) / (2b - 1)` is clamped to `[0, 1]`.
pub fn local_estimate(n: usize, t: usize, b_prev: f64) -> Result<f64, FreError> {
    check_inputs(n, t, b_prev)?;
    let rate = n as f64 / t as f64;
    if b_prev == 1.0 {
        return Ok(rate);
    }
    let ratio = (rate + b_prev - 1.0) / (2.0 * b_prev - 1.0);
    Ok(ratio.clamp(0.0, 1.0))
}

/// Fisher-information confidence of [`local_estimate`]. Every accuracy factor
/// is evaluated at `b_prev`.
pub fn local_confidence(n: usize, t: usize, b_prev: f64, estimate: f64) -> Result<f64, FreError> {
    local_confidence_split(n, t, b_prev, b_prev, estimate)
}

/// Confidence with the squared-accuracy factors of the boundary branches taken
/// at `b_current` and the remaining factors at `b_prev`. With
/// `b_current == b_prev` this is [`local_confidence`]. Negative boundary values
/// that the split evaluation can produce are clamped to zero.
pub fn local_confidence_split(
    n: usize,
    t: usize,
    b_prev: f64,
    b_current: f64,
    estimate: f64,
) -> Result<f64, FreError> {
    check_inputs(n, t, b_prev)?;
    let nu = 2.0 * b_prev - 1.0;
    let tf = t as f64;
    let nf = n as f64;
    if estimate > 0.0 && estimate < 1.0 {
        if n == 0 || n == t {
            return Err(FreError::DegenerateCounts { n, t });
        }
        return Ok(nu * nu * tf.powi(3) / (nf * (tf - nf)));
    }
    // boundary branches: x̂ = 0 uses the white count, x̂ = 1 the black count
    let count = if estimate <= 0.0 { tf - nf } else { nf };
    let b_sq = b_current * b_current;
    let miss_sq = (b_prev - 1.0).powi(2);
    if miss_sq == 0.0 {
        // b_prev = 1 reaches a boundary only with n ∈ {0, t}; take the limit
        return Ok(nu * nu * tf / b_sq);
    }
    // t b_c² - ν c rearranged as t((b_c - b)(b_c + b) + (1 - b)²) + ν(t - c),
    // which avoids cancellation as b → 1
    let spread = (b_current - b_prev) * (b_current + b_prev) + miss_sq;
    let alpha = nu * nu * (tf * spread + nu * (tf - count)) / (b_sq * miss_sq);
    Ok(alpha.max(0.0))
}

/// Local estimate and confidence together.
pub fn local_belief(n: usize, t: usize, b_prev: f64) -> Result<LocalBelief, FreError> {
    let estimate = local_estimate(n, t, b_prev)?;
    let confidence = local_confidence(n, t, b_prev, estimate)?;
    Ok(LocalBelief {
        estimate,
        confidence,
    })
}

/// Confidence-weighted average of neighbor beliefs. Returns
/// [`SocialBelief::EMPTY`] for no neighbors or zero total confidence.
pub fn social_fuse<'a, I>(beliefs: I) -> SocialBelief
where
    I: IntoIterator<Item = &'a LocalBelief>,
{
    let (weighted, total) = beliefs
        .into_iter()
        .fold((0.0, 0.0), |(w, s), b| (w + b.confidence * b.estimate, s + b.confidence));
    if total > 0.0 {
        SocialBelief {
            estimate: (weighted / total).clamp(0.0, 1.0),
            confidence: total,
        }
    } else {
        SocialBelief::EMPTY
    }
}

/// Convex combination of local and social beliefs by confidence. With zero
/// total confidence the local estimate is returned unchanged.
pub fn informed_estimate(local: &LocalBelief, social: &SocialBelief) -> f64 {
    let total = local.confidence + social.confidence;
    if total > 0.0 {
        (local.confidence * local.estimate + social.confidence * social.estimate) / total
    } else {
        local.estimate
    }
}

/// Bounded history of informed estimates, newest first.
#[derive(Debug, Clone)]
pub struct InformedHistory {
    values: VecDeque<f64>,
    capacity: usize,
}

impl InformedHistory {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "history capacity must be at least 1");
        Self {
            values: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn push(&mut self, value: f64) {
        if self.values.len() == self.capacity {
            self.values.pop_back();
        }
        self.values.push_front(value);
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

    /// Values newest first.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.values.iter()
    }
}

/// Weighted moving average over the newest `min(window, len)` informed
/// estimates, with weight `j + 1` on the estimate `j` entries old.
pub fn wma_reference(history: &InformedHistory, window: usize) -> Result<f64, FreError> {
    if history.is_empty() {
        return Err(FreError::EmptyHistory);
    }
    let q = window.max(1).min(history.len());
    let (sum, lo, hi) = history.iter().take(q).enumerate().fold(
        (0.0, f64::INFINITY, f64::NEG_INFINITY),
        |(s, lo, hi), (j, x)| (s + (j + 1) as f64 * x, lo.min(*x), hi.max(*x)),
    );
    let norm = (q * (q + 1) / 2) as f64;
    Ok((sum / norm).clamp(lo, hi))
}
