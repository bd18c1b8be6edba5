use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bayescpf::agent::Pose;
use bayescpf::cc::{self, AccuracyBounds};
use bayescpf::fre::{self, InformedHistory, LocalBelief};
use bayescpf::metrics::{self, phase_boundary, Phase};
use bayescpf::oqa::{self, ObservationQueue, OqaParams};
use bayescpf::sae::{self, EkfBelief};
use bayescpf::swarm::{self, ArenaConfig};
use bayescpf::world::{self, Observation, Point, TileGrid};

fn counts() -> impl Strategy<Value = (usize, usize)> {
    (1usize..2000).prop_flat_map(|t| (0..=t, Just(t)))
}

proptest! {
    #[test]
    fn grid_fill_is_rounded_target(side in 1.0f64..8.0, f in 0.0f64..=1.0, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = TileGrid::generate(side, 0.1, f, &mut rng).unwrap();
        let total = g.total_tiles() as f64;
        prop_assert!((g.realized_fill_ratio() - f).abs() <= 0.5 / total + 1e-12);
    }

    #[test]
    fn black_probability_is_a_probability(b in 0.0f64..=1.0, f in 0.0f64..=1.0) {
        let q = world::black_tile_probability(b, f);
        prop_assert!((0.0..=1.0).contains(&q));
    }

    #[test]
    fn local_belief_in_range((n, t) in counts(), b in 0.5001f64..=1.0) {
        let l = fre::local_belief(n, t, b).unwrap();
        prop_assert!((0.0..=1.0).contains(&l.estimate));
        prop_assert!(l.confidence >= 0.0);
    }

    #[test]
    fn fusion_is_convex(
        beliefs in prop::collection::vec((0.0f64..=1.0, 0.0f64..1e6), 0..20),
        local in (0.0f64..=1.0, 0.0f64..1e6),
    ) {
        let beliefs: Vec<LocalBelief> = beliefs
            .into_iter()
            .map(|(estimate, confidence)| LocalBelief { estimate, confidence })
            .collect();
        let social = fre::social_fuse(&beliefs);
        let local = LocalBelief { estimate: local.0, confidence: local.1 };
        let x = fre::informed_estimate(&local, &social);
        let lo = local.estimate.min(social.estimate);
        let hi = local.estimate.max(social.estimate);
        prop_assert!(x >= lo - 1e-12 && x <= hi + 1e-12);
        if social.confidence > 0.0 {
            let (min, max) = beliefs
                .iter()
                .filter(|b| b.confidence > 0.0)
                .fold((1.0f64, 0.0f64), |(a, z), b| (a.min(b.estimate), z.max(b.estimate)));
            prop_assert!(social.estimate >= min - 1e-12 && social.estimate <= max + 1e-12);
        }
    }

    #[test]
    fn wma_stays_within_window(
        values in prop::collection::vec(0.0f64..=1.0, 1..200),
        window in 1usize..300,
    ) {
        let mut h = InformedHistory::new(values.len());
        values.iter().for_each(|v| h.push(*v));
        let r = fre::wma_reference(&h, window).unwrap();
        let seen: Vec<f64> = h.iter().take(window).copied().collect();
        let lo = seen.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = seen.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(r >= lo && r <= hi);
    }

    #[test]
    fn update_never_inflates_variance(
        mean in 0.55f64..0.99,
        var in 1e-8f64..1e-1,
        (n, t) in counts(),
        reference in 0.0f64..=1.0,
    ) {
        let prior = EkfBelief::new(mean, var);
        let post = sae::update(&prior, n, t, reference);
        prop_assert!(post.variance <= prior.variance * (1.0 + 1e-12));
        prop_assert!(post.variance > 0.0);
    }

    #[test]
    fn constrained_value_within_bounds(
        lo in 0.5f64..0.95,
        width in 0.01f64..0.5,
        mean in -2.0f64..3.0,
        log_var in -14.0f64..2.0,
    ) {
        let bounds = AccuracyBounds::new(lo, (lo + width).min(1.0)).unwrap();
        let v = cc::constrain(&EkfBelief::new(mean, 10f64.powf(log_var)), &bounds).value;
        prop_assert!(bounds.contains(v));
    }

    #[test]
    fn truncated_mean_within_limits(l in -40.0f64..40.0, width in 1e-3f64..20.0) {
        let u = l + width;
        let m = cc::truncated_mean(l, u).unwrap();
        prop_assert!(m >= l && m <= u, "{l} {u} {m}");
    }

    #[test]
    fn count_shrinks_with_faster_degradation(
        reference in 0.0f64..=1.0,
        rate in 1e-9f64..1e-3,
        scale in 1.0f64..100.0,
        k in 0u64..100_000,
    ) {
        let p = OqaParams::new(0.2, 10, 1000, 5).unwrap();
        let slow = oqa::adjusted_observation_count(&p, reference, -rate, k);
        let fast = oqa::adjusted_observation_count(&p, reference, -rate * scale, k);
        prop_assert!(fast <= slow);
        prop_assert!((1..=p.capacity).contains(&slow));
        let sharper = if reference >= 0.5 { (reference + 0.1).min(1.0) } else { (reference - 0.1).max(0.0) };
        prop_assert!(oqa::adjusted_observation_count(&p, sharper, -rate, k) <= slow);
    }

    #[test]
    fn window_counts_bounded(obs in prop::collection::vec(any::<bool>(), 0..300), t in 0usize..400) {
        let mut q = ObservationQueue::new(250);
        obs.iter().for_each(|b| q.push(Observation { black: *b, step: 0 }));
        let c = oqa::window_counts(&q, t);
        prop_assert!(c.total <= q.len() && c.total <= t);
        prop_assert!(c.black <= c.total);
    }

    #[test]
    fn rmsd_ignores_order(mut values in prop::collection::vec(0.0f64..=1.0, 1..50), r in 0.0f64..=1.0) {
        let a = metrics::step_rmsd(&values, r).unwrap();
        values.reverse();
        let b = metrics::step_rmsd(&values, r).unwrap();
        prop_assert!((a - b).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn boundary_splits_the_run(b0 in 0.5f64..=1.0, drift in -1e-4f64..1e-4, k_max in 1u64..100_000) {
        let p = phase_boundary(b0, drift, 0.5, k_max);
        for k in [0, k_max / 2, k_max] {
            prop_assert!(p.contains(Phase::Transient, k) ^ p.contains(Phase::Equilibrium, k));
        }
    }

    #[test]
    fn neighbors_symmetric_and_irreflexive(
        pts in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), 0..30),
        radius in 0.0f64..3.0,
    ) {
        let pts: Vec<Point> = pts.into_iter().map(|(x, y)| Point::new(x, y)).collect();
        let sets = swarm::neighbors(&pts, radius);
        for (i, s) in sets.iter().enumerate() {
            prop_assert!(!s.contains(&i));
            for j in s {
                prop_assert!(sets[*j].contains(&i));
            }
        }
    }

    #[test]
    fn diffusion_stays_inside(seed in any::<u64>(), steps in 1usize..500) {
        let arena = ArenaConfig::default();
        let side = arena.side_length();
        let r = arena.diameter / 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pose: Pose = swarm::random_pose(&arena, side, &mut rng);
        for _ in 0..steps {
            pose = swarm::diffuse(pose, &arena, side, &[], &mut rng);
            let p = pose.position;
            prop_assert!(p.x >= r && p.x <= side - r && p.y >= r && p.y <= side - r);
        }
    }
}
