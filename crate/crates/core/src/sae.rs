//! Sensor-accuracy estimation: a scalar extended Kalman filter over the
//! assumed accuracy with a Wiener-drift transition and a Gaussian-limit
//! binomial measurement referenced to the weighted informed estimate.

/// Floor applied to the measurement-noise variance `t q (1 - q)`.
pub const MEASUREMENT_VARIANCE_FLOOR: f64 = 1e-9;

/// Minimum expected successes and failures for the Gaussian approximation.
pub const GATE_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EkfBelief {
    pub mean: f64,
    pub variance: f64,
}

impl EkfBelief {
    pub fn new(mean: f64, variance: f64) -> Self {
        debug_assert!(variance >= 0.0);
        Self { mean, variance }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Assumed drift and diffusion, expressed per filter activation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumedDegradation {
    pub drift: f64,
    pub diffusion: f64,
}

impl AssumedDegradation {
    /// Converts per-control-step coefficients to a filter that runs every
    /// `period` steps: drift adds linearly, Wiener variance adds linearly.
    pub fn per_activation(drift_per_step: f64, diffusion_per_step: f64, period: u64) -> Self {
        let p = period as f64;
        Self {
            drift: drift_per_step * p,
            diffusion: diffusion_per_step * p.sqrt(),
        }
    }
}

/// Gaussian limit of the black-count likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementLikelihood {
    pub mean: f64,
    pub variance: f64,
}

impl MeasurementLikelihood {
    pub fn new(success_probability: f64, t: usize) -> Self {
        let q = success_probability.clamp(0.0, 1.0);
        let tf = t as f64;
        Self {
            mean: tf * q,
            variance: tf * q * (1.0 - q),
        }
    }
}

/// Expected black count `h(b)` and its Jacobian `dh/db`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub expected: f64,
    pub jacobian: f64,
}

pub fn predict(belief: &EkfBelief, model: &AssumedDegradation) -> EkfBelief {
    EkfBelief {
        mean: belief.mean + model.drift,
        variance: belief.variance + model.diffusion * model.diffusion,
    }
}

/// `h(b) = t (b (2x' - 1) - x' + 1)` with Jacobian `t (2x' - 1)`.
pub fn measurement_model(b: f64, t: usize, reference: f64) -> Measurement {
    let tf = t as f64;
    let slope = 2.0 * reference - 1.0;
    Measurement {
        expected: tf * (b * slope - reference + 1.0),
        jacobian: tf * slope,
    }
}

/// Whether `t b >= 5` and `t (1 - b) >= 5`.
pub fn gate_passes(prior_mean: f64, t: usize) -> bool {
    let tf = t as f64;
    tf * prior_mean >= GATE_THRESHOLD && tf * (1.0 - prior_mean) >= GATE_THRESHOLD
}

/// EKF correction with `n` black readings out of `t` against reference `x'`.
/// When the gate fails the prior is returned unchanged.
pub fn update(prior: &EkfBelief, n: usize, t: usize, reference: f64) -> EkfBelief {
    if !gate_passes(prior.mean, t) {
        return *prior;
    }
    let m = measurement_model(prior.mean, t, reference);
    let q = m.expected / t as f64;
    let noise = MeasurementLikelihood::new(q, t)
        .variance
        .max(MEASUREMENT_VARIANCE_FLOOR);
    let innovation_variance = m.jacobian * m.jacobian * prior.variance + noise;
    if innovation_variance <= 0.0 {
        return *prior;
    }
    let gain = prior.variance * m.jacobian / innovation_variance;
    EkfBelief {
        mean: prior.mean + gain * (n as f64 - m.expected),
        // (1 - K H) ρ², written as ρ² σ² / S to avoid cancellation when K H → 1
        variance: prior.variance * noise / innovation_variance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_examples() {
        let b = predict(
            &EkfBelief::new(0.9, 1e-4),
            &AssumedDegradation {
                drift: -1e-5,
                diffusion: 1e-4,
            },
        );
        assert!((b.mean - 0.89999).abs() < 1e-15);
        assert!((b.variance - 1.0001e-4).abs() < 1e-18);
        let same = predict(
            &EkfBelief::new(0.7, 3e-3),
            &AssumedDegradation {
                drift: 0.0,
                diffusion: 0.0,
            },
        );
        assert_eq!(same, EkfBelief::new(0.7, 3e-3));
    }

    #[test]
    fn per_activation_conversion() {
        let m = AssumedDegradation::per_activation(-1e-5, 1e-4, 5);
        assert!((m.drift + 5e-5).abs() < 1e-18);
        assert!((m.diffusion * m.diffusion - 5e-8).abs() < 1e-20);
    }

    #[test]
    fn measurement_examples() {
        let m = measurement_model(0.9, 100, 0.95);
        assert!((m.expected - 86.0).abs() < 1e-12);
        assert!((m.jacobian - 90.0).abs() < 1e-12);
        for b in [0.5, 0.7, 1.0] {
            let m = measurement_model(b, 100, 0.5);
            assert_eq!(m.expected, 50.0);
            assert_eq!(m.jacobian, 0.0);
        }
        let m = measurement_model(1.0, 40, 1.0);
        assert_eq!(m.expected, 40.0);
        assert_eq!(m.jacobian, 40.0);
    }

    #[test]
    fn gate_failure_keeps_prior() {
        let prior = EkfBelief::new(0.9, 1e-2);
        assert_eq!(update(&prior, 3, 4, 0.95), prior);
        // t (1 - b) = 4.9 < 5
        let prior = EkfBelief::new(0.951, 1e-2);
        assert_eq!(update(&prior, 90, 100, 0.95), prior);
    }

    #[test]
    fn gate_boundary_is_inclusive() {
        // t b = 5 exactly
        let prior = EkfBelief::new(0.5, 1e-2);
        assert!(gate_passes(0.5, 10));
        let post = update(&prior, 9, 10, 0.9);
        assert_ne!(post, prior);
    }

    #[test]
    fn confident_prior_does_not_move() {
        let prior = EkfBelief::new(0.8, 0.0);
        let post = update(&prior, 10, 100, 0.9);
        assert_eq!(post.mean, 0.8);
        assert_eq!(post.variance, 0.0);
    }

    #[test]
    fn ambiguous_reference_carries_no_information() {
        let prior = EkfBelief::new(0.8, 1e-3);
        let post = update(&prior, 90, 100, 0.5);
        assert_eq!(post.mean, prior.mean);
        assert_eq!(post.variance, prior.variance);
    }

    #[test]
    fn worked_update() {
        let prior = EkfBelief::new(0.9, 1e-2);
        let post = update(&prior, 80, 100, 0.95);
        // q = 0.86, σ² = 12.04, H = 90, S = 81 + 12.04
        let s: f64 = 81.0 + 12.04;
        let k = 1e-2 * 90.0 / s;
        assert!((k - 9.673e-3).abs() < 1e-6);
        assert!((post.mean - (0.9 + k * (80.0 - 86.0))).abs() < 1e-12);
        assert!((post.mean - 0.8420).abs() < 1e-4);
        assert!((post.variance - (1.0 - k * 90.0) * 1e-2).abs() < 1e-12);
        assert!((post.variance - 1.294e-3).abs() < 1e-6);
    }

    #[test]
    fn likelihood_moments() {
        let l = MeasurementLikelihood::new(0.86, 100);
        assert!((l.mean - 86.0).abs() < 1e-12);
        assert!((l.variance - 12.04).abs() < 1e-12);
    }
}
