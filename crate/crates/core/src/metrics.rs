//! Swarm error metrics: per-step RMSD, degradation-phase boundaries and the
//! per-phase normalized RMSD used to compare runs.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("RMSD of an empty set")]
    Empty,
    #[error("values and references differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("phase {0} has no recorded steps")]
    EmptyPhase(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    pub delta_x: f64,
    pub delta_b: f64,
}

pub fn step_rmsd(values: &[f64], reference: f64) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let ss: f64 = values.iter().map(|v| (v - reference).powi(2)).sum();
    Ok((ss / values.len() as f64).sqrt())
}

/// RMSD against a per-agent reference.
pub fn paired_rmsd(values: &[f64], references: &[f64]) -> Result<f64, MetricsError> {
    if values.len() != references.len() {
        return Err(MetricsError::LengthMismatch(values.len(), references.len()));
    }
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let ss: f64 = values.iter().zip(references).map(|(v, r)| (v - r).powi(2)).sum();
    Ok((ss / values.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Transient,
    Equilibrium,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Transient => "transient",
            Phase::Equilibrium => "equilibrium",
        }
    }
}

/// Transient phase `[0, boundary)`, equilibrium `[boundary, K_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseBoundary {
    pub boundary: u64,
    pub end: u64,
}

impl PhaseBoundary {
    pub fn phase_of(&self, k: u64) -> Phase {
        if k < self.boundary {
            Phase::Transient
        } else {
            Phase::Equilibrium
        }
    }

    pub fn equilibrium_is_empty(&self) -> bool {
        self.boundary > self.end
    }

    pub fn contains(&self, phase: Phase, k: u64) -> bool {
        k <= self.end && self.phase_of(k) == phase
    }
}

/// Step at which the drift alone carries `b0` to `floor`. A non-negative drift
/// makes the whole run transient.
pub fn phase_boundary(b0: f64, drift: f64, floor: f64, k_max: u64) -> PhaseBoundary {
    if !(drift < 0.0) {
        return PhaseBoundary {
            boundary: k_max + 1,
            end: k_max,
        };
    }
    let exact = (floor - b0) / drift;
    // a ratio that is integral up to rounding is not pushed to the next step
    let crossing = if (exact - exact.round()).abs() <= 1e-9 * exact.abs().max(1.0) {
        exact.round()
    } else {
        exact.ceil()
    }
    .max(0.0);
    let boundary = if crossing >= (k_max + 1) as f64 {
        k_max + 1
    } else {
        crossing as u64
    };
    PhaseBoundary { boundary, end: k_max }
}

/// Mean `delta` over the recorded steps that fall in `phase`.
pub fn phase_nrmsd(
    series: &[StepMetrics],
    boundary: &PhaseBoundary,
    phase: Phase,
    delta: impl Fn(&StepMetrics) -> f64,
) -> Result<f64, MetricsError> {
    let (sum, count) = series
        .iter()
        .filter(|m| boundary.contains(phase, m.step))
        .fold((0.0, 0usize), |(s, c), m| (s + delta(m), c + 1));
    if count == 0 {
        return Err(MetricsError::EmptyPhase(phase.as_str()));
    }
    Ok(sum / count as f64)
}

/// Negative when the first filter beats the second.
pub fn nrmsd_difference(zeta_x: f64, zeta_x_star: f64) -> f64 {
    zeta_x - zeta_x_star
}
