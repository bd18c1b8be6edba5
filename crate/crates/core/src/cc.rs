//! Constraint compliance: projects the unconstrained EKF posterior into the
//! feasible accuracy interval through the mean of the truncated posterior.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use thiserror::Error;

use crate::sae::EkfBelief;

// Below this the tail mass is no longer representable and the mean collapses
// onto the nearer truncation limit.
const TAIL_MASS_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, PartialEq)]
pub enum CcError {
    #[error("truncation limits must satisfy lower < upper, got [{0}, {1}]")]
    InvalidLimits(f64, f64),
    #[error("accuracy bounds must satisfy 0.5 <= lower < upper <= 1, got [{0}, {1}]")]
    InvalidBounds(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyBounds {
    lower: f64,
    upper: f64,
}

impl AccuracyBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self, CcError> {
        if !(0.5 <= lower && lower < upper && upper <= 1.0) {
            return Err(CcError::InvalidBounds(lower, upper));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn contains(&self, b: f64) -> bool {
        (self.lower..=self.upper).contains(&b)
    }
}

impl Default for AccuracyBounds {
    fn default() -> Self {
        Self {
            lower: 0.5,
            upper: 1.0,
        }
    }
}

/// Standardized limits and mean of a truncated posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub lower: f64,
    pub upper: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationResult {
    /// Constrained assumed accuracy.
    pub value: f64,
    /// Present only when the posterior mean was out of bounds and truncated.
    pub truncation: Option<Truncation>,
}

/// Mean of a standard normal truncated to `[lower, upper]`:
/// `sqrt(2/π) (exp(-l²/2) - exp(-u²/2)) / (erf(u/√2) - erf(l/√2))`.
///
/// Limits on the same side of zero use the complementary error function so the
/// tail mass keeps full relative precision.
pub fn truncated_mean(lower: f64, upper: f64) -> Result<f64, CcError> {
    if !(lower < upper) {
        return Err(CcError::InvalidLimits(lower, upper));
    }
    if upper <= 0.0 {
        return truncated_mean(-upper, -lower).map(|y| -y);
    }
    let density_gap = (-0.5 * lower * lower).exp() - (-0.5 * upper * upper).exp();
    let mass = if lower >= 0.0 {
        libm::erfc(lower * FRAC_1_SQRT_2) - libm::erfc(upper * FRAC_1_SQRT_2)
    } else {
        libm::erf(upper * FRAC_1_SQRT_2) - libm::erf(lower * FRAC_1_SQRT_2)
    };
    if !(mass > TAIL_MASS_FLOOR) {
        // far tail: the mean sits on the nearer limit
        return Ok(lower);
    }
    let y = (2.0 / PI).sqrt() * density_gap / mass;
    Ok(y.clamp(lower, upper))
}

/// Constrained assumed accuracy from an EKF posterior. The posterior itself is
/// never modified; in-bounds means pass through unchanged.
pub fn constrain(posterior: &EkfBelief, bounds: &AccuracyBounds) -> TruncationResult {
    let mean = posterior.mean;
    if bounds.contains(mean) {
        return TruncationResult {
            value: mean,
            truncation: None,
        };
    }
    let sd = posterior.std_dev();
    if !(sd > 0.0) {
        return TruncationResult {
            value: mean.clamp(bounds.lower, bounds.upper),
            truncation: None,
        };
    }
    let lower = (bounds.lower - mean) / sd;
    let upper = (bounds.upper - mean) / sd;
    let value = match truncated_mean(lower, upper) {
        Ok(y) => (sd * y + mean).clamp(bounds.lower, bounds.upper),
        // limits collapsed numerically (sd tiny relative to the interval)
        Err(_) => mean.clamp(bounds.lower, bounds.upper),
    };
    let y = (value - mean) / sd;
    TruncationResult {
        value,
        truncation: Some(Truncation {
            lower,
            upper,
            mean: y,
        }),
    }
}
