//! Per-robot filter state machine: observation, neighbor exchange, fill-ratio
//! estimation and the periodic accuracy update, plus the ablation variant that
//! is handed its true accuracy.

use rand_chacha::ChaCha8Rng;

use crate::cc::{self, AccuracyBounds};
use crate::fre::{self, InformedHistory, LocalBelief, SocialBelief};
use crate::oqa::{self, AccuracyTrail, DerivativeWeighting, ObservationQueue, OqaParams, WindowCounts};
use crate::sae::{self, AssumedDegradation, EkfBelief};
use crate::world::{self, Point, SensorState, TileGrid, WorldError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub observe: u64,
    pub comms: u64,
    pub filter: u64,
}

impl Schedule {
    pub fn is_observation_step(&self, k: u64) -> bool {
        k > 0 && k.is_multiple_of(self.observe)
    }

    pub fn is_comms_step(&self, k: u64) -> bool {
        k > 0 && k.is_multiple_of(self.comms)
    }

    pub fn is_filter_step(&self, k: u64) -> bool {
        k > 0 && k.is_multiple_of(self.filter)
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            observe: 5,
            comms: 5,
            filter: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    BayesCpf,
    Ablation,
}

impl FilterMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FilterMode::BayesCpf => "bayescpf",
            FilterMode::Ablation => "ablation",
        }
    }
}

/// Everything an agent's filter needs besides its sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterConfig {
    pub schedule: Schedule,
    /// Assumed Wiener coefficients per filter activation.
    pub model: AssumedDegradation,
    pub initial_accuracy: f64,
    pub initial_variance: f64,
    pub bounds: AccuracyBounds,
    pub oqa: OqaParams,
    pub derivative: DerivativeWeighting,
    /// Evaluate the squared-accuracy factors of the boundary confidence at the
    /// newest assumed accuracy instead of the one used for the estimate.
    pub split_confidence: bool,
}

/// Message broadcast to neighbors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatePacket {
    pub sender: usize,
    pub estimate: f64,
    pub confidence: f64,
    pub step: u64,
}

impl EstimatePacket {
    pub fn belief(&self) -> LocalBelief {
        LocalBelief {
            estimate: self.estimate,
            confidence: self.confidence,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FilterState {
    pub ekf: EkfBelief,
    pub assumed: f64,
    pub previous_assumed: f64,
    pub queue: ObservationQueue,
    pub history: InformedHistory,
    pub trail: AccuracyTrail,
    pub local: Option<LocalBelief>,
    pub social: SocialBelief,
    pub informed: f64,
    pub reference: f64,
    pub counts: WindowCounts,
    pub observations: u64,
    pub activations: u64,
}

impl FilterState {
    fn new(config: &FilterConfig) -> Self {
        Self {
            ekf: EkfBelief::new(config.initial_accuracy, config.initial_variance),
            assumed: config.initial_accuracy,
            previous_assumed: config.initial_accuracy,
            queue: ObservationQueue::new(config.oqa.capacity),
            history: InformedHistory::new(config.oqa.capacity),
            trail: AccuracyTrail::new(config.oqa.window, config.schedule.filter),
            local: None,
            social: SocialBelief::EMPTY,
            informed: 0.0,
            reference: 0.0,
            counts: WindowCounts::default(),
            observations: 0,
            activations: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Point,
    pub heading: f64,
}

#[derive(Debug, Clone)]
pub struct Agent {
    id: usize,
    pub pose: Pose,
    sensor: SensorState,
    filter: FilterState,
    config: FilterConfig,
    mode: FilterMode,
    sensor_rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(
        id: usize,
        pose: Pose,
        sensor: SensorState,
        config: FilterConfig,
        mode: FilterMode,
        sensor_rng: ChaCha8Rng,
    ) -> Self {
        let mut filter = FilterState::new(&config);
        if mode == FilterMode::Ablation {
            filter.assumed = sensor.accuracy();
            filter.previous_assumed = sensor.accuracy();
        }
        Self {
            id,
            pose,
            sensor,
            filter,
            config,
            mode,
            sensor_rng,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn mode(&self) -> FilterMode {
        self.mode
    }

    pub fn sensor(&self) -> &SensorState {
        &self.sensor
    }

    pub fn filter(&self) -> &FilterState {
        &self.filter
    }

    pub fn true_accuracy(&self) -> f64 {
        self.sensor.accuracy()
    }

    pub fn assumed_accuracy(&self) -> f64 {
        self.filter.assumed
    }

    pub fn informed_estimate(&self) -> f64 {
        self.filter.informed
    }

    pub fn reference_estimate(&self) -> f64 {
        self.filter.reference
    }

    /// Current local belief as a packet, or `None` before the first estimate.
    pub fn make_packet(&self, k: u64) -> Option<EstimatePacket> {
        self.filter.local.map(|b| EstimatePacket {
            sender: self.id,
            estimate: b.estimate,
            confidence: b.confidence,
            step: k,
        })
    }

    /// Advances the agent to step `k`. Motion has already been applied to
    /// `pose`. `inbox` is `Some` exactly on communication steps.
    pub fn step(
        &mut self,
        k: u64,
        grid: &TileGrid,
        inbox: Option<&[EstimatePacket]>,
    ) -> Result<(), WorldError> {
        let schedule = self.config.schedule;
        self.sensor = self.sensor.degrade(&mut self.sensor_rng);
        if self.mode == FilterMode::Ablation {
            self.filter.previous_assumed = self.filter.assumed;
            self.filter.assumed = self.sensor.accuracy();
        }

        if schedule.is_observation_step(k) {
            let z = world::observe(grid, self.pose.position, &self.sensor, k, &mut self.sensor_rng)?;
            self.filter.queue.push(z);
            self.filter.observations += 1;
        }

        if let Some(packets) = inbox {
            let beliefs: Vec<LocalBelief> = packets.iter().map(|p| p.belief()).collect();
            self.filter.social = fre::social_fuse(&beliefs);
        }

        if !self.filter.queue.is_empty() && self.filter.counts.total > 0 {
            self.estimate_fill_ratio();
        }

        if schedule.is_filter_step(k) {
            self.update_accuracy(k);
        }
        Ok(())
    }

    fn estimate_fill_ratio(&mut self) {
        let f = &mut self.filter;
        let WindowCounts { black, total } = f.counts;
        let b_prev = fre::guard_accuracy(f.assumed);
        let Ok(estimate) = fre::local_estimate(black, total, b_prev) else {
            return;
        };
        let confidence = if self.config.split_confidence {
            let b_older = fre::guard_accuracy(f.previous_assumed);
            fre::local_confidence_split(black, total, b_older, b_prev, estimate)
        } else {
            fre::local_confidence(black, total, b_prev, estimate)
        };
        let Ok(confidence) = confidence else {
            return;
        };
        let local = LocalBelief {
            estimate,
            confidence,
        };
        f.local = Some(local);
        f.informed = fre::informed_estimate(&local, &f.social);
        f.history.push(f.informed);
        // the OQA window doubles as the moving-average window
        if let Ok(x) = fre::wma_reference(&f.history, f.counts.total) {
            f.reference = x;
        }
    }

    fn update_accuracy(&mut self, k: u64) {
        let cfg = self.config;
        let f = &mut self.filter;
        f.activations += 1;
        match self.mode {
            FilterMode::BayesCpf => {
                let prior = sae::predict(&f.ekf, &cfg.model);
                f.ekf = if f.counts.total > 0 {
                    sae::update(&prior, f.counts.black, f.counts.total, f.reference)
                } else {
                    prior
                };
                f.previous_assumed = f.assumed;
                f.assumed = cc::constrain(&f.ekf, &cfg.bounds).value;
            }
            FilterMode::Ablation => {
                f.assumed = self.sensor.accuracy();
            }
        }
        f.trail.push(f.assumed);
        let rate = oqa::accuracy_derivative(&f.trail, cfg.derivative).unwrap_or(0.0);
        let window = oqa::adjusted_observation_count(&cfg.oqa, f.reference, rate, k);
        f.counts = oqa::window_counts(&f.queue, window);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::DegradationParams;
    use rand::SeedableRng;

    fn config() -> FilterConfig {
        FilterConfig {
            schedule: Schedule::default(),
            model: AssumedDegradation::per_activation(-1e-5, 1e-4, 5),
            initial_accuracy: 1.0,
            initial_variance: 1e-4,
            bounds: AccuracyBounds::default(),
            oqa: OqaParams::new(0.02, 500, 1000, 5).unwrap(),
            derivative: DerivativeWeighting::Mirrored,
            split_confidence: false,
        }
    }

    fn agent(mode: FilterMode, seed: u64) -> Agent {
        let params = DegradationParams::new(-1e-5, 1e-4, 0.5, 1.0).unwrap();
        Agent::new(
            0,
            Pose {
                position: Point::new(0.55, 0.55),
                heading: 0.0,
            },
            SensorState::new(1.0, params).unwrap(),
            config(),
            mode,
            ChaCha8Rng::seed_from_u64(seed),
        )
    }

    fn grid() -> TileGrid {
        TileGrid::generate(1.0, 0.1, 0.75, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn observes_on_schedule() {
        let g = grid();
        let mut a = agent(FilterMode::BayesCpf, 1);
        for k in 1..=4 {
            a.step(k, &g, None).unwrap();
            assert_eq!(a.filter().queue.len(), 0);
        }
        a.step(5, &g, None).unwrap();
        assert_eq!(a.filter().queue.len(), 1);
        for k in 6..=1003 {
            a.step(k, &g, None).unwrap();
        }
        assert_eq!(a.filter().observations, 1003 / 5);
        assert_eq!(a.filter().activations, 1003 / 5);
    }

    #[test]
    fn no_packet_before_first_estimate() {
        let g = grid();
        let mut a = agent(FilterMode::BayesCpf, 1);
        assert!(a.make_packet(0).is_none());
        for k in 1..=5 {
            a.step(k, &g, None).unwrap();
        }
        // first window is set at the first activation, estimates start after
        assert!(a.make_packet(5).is_none());
        a.step(6, &g, None).unwrap();
        let p = a.make_packet(6).unwrap();
        let local = a.filter().local.unwrap();
        assert_eq!((p.estimate, p.confidence, p.step), (local.estimate, local.confidence, 6));
    }

    #[test]
    fn empty_inbox_gives_local_informed() {
        let g = grid();
        let mut a = agent(FilterMode::BayesCpf, 3);
        for k in 1..=50 {
            let inbox: Option<&[EstimatePacket]> = if k % 5 == 0 { Some(&[]) } else { None };
            a.step(k, &g, inbox).unwrap();
        }
        assert_eq!(a.filter().social, SocialBelief::EMPTY);
        assert_eq!(a.informed_estimate(), a.filter().local.unwrap().estimate);
    }

    #[test]
    fn packets_unchanged_without_new_information() {
        let g = grid();
        let mut a = agent(FilterMode::BayesCpf, 3);
        for k in 1..=12 {
            a.step(k, &g, None).unwrap();
        }
        let p1 = a.make_packet(12).unwrap();
        a.step(13, &g, None).unwrap();
        let p2 = a.make_packet(13).unwrap();
        assert_eq!((p1.estimate, p1.confidence), (p2.estimate, p2.confidence));
    }

    #[test]
    fn ablation_tracks_true_accuracy() {
        let g = grid();
        let mut a = agent(FilterMode::Ablation, 9);
        for k in 1..=3000 {
            a.step(k, &g, None).unwrap();
            assert_eq!(a.assumed_accuracy(), a.true_accuracy());
        }
    }

    #[test]
    fn identical_seeds_identical_trajectories() {
        let g = grid();
        let mut a = agent(FilterMode::BayesCpf, 21);
        let mut b = agent(FilterMode::BayesCpf, 21);
        for k in 1..=4000 {
            a.step(k, &g, None).unwrap();
            b.step(k, &g, None).unwrap();
            assert_eq!(a.assumed_accuracy().to_bits(), b.assumed_accuracy().to_bits());
            assert_eq!(a.informed_estimate().to_bits(), b.informed_estimate().to_bits());
        }
    }

    #[test]
    fn buffers_stay_bounded() {
        let g = grid();
        let mut a = agent(FilterMode::BayesCpf, 4);
        for k in 1..=8000 {
            a.step(k, &g, None).unwrap();
        }
        let f = a.filter();
        assert_eq!(f.queue.len(), 1000);
        assert!(f.history.len() <= 1000);
        assert!(f.trail.len() <= 501);
        assert!((0.5..=1.0).contains(&a.assumed_accuracy()));
    }
}
