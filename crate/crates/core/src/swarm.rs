//! Swarm kinematics and communication: arena sizing from density, random
//! diffusion with wall and peer avoidance, radius neighbor sets, and the
//! lockstep update that moves every robot, exchanges packets and steps each
//! filter.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{Agent, EstimatePacket, Pose};
use crate::world::{Point, TileGrid, WorldError};

/// Stream ids used to split a trial seed into independent generators.
pub mod streams {
    pub const GRID: u64 = 0;
    pub const COMMS: u64 = 1;

    pub fn motion(agent: usize) -> u64 {
        2 + 2 * agent as u64
    }

    pub fn sensor(agent: usize) -> u64 {
        3 + 2 * agent as u64
    }
}

/// Generator for one purpose within a trial: ChaCha8 keyed by the trial seed,
/// with a distinct stream per purpose.
pub fn stream_rng(trial_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
    rng.set_stream(stream);
    rng
}

pub fn arena_side_length(num_agents: usize, comm_radius: f64, density: f64) -> f64 {
    (num_agents as f64 * PI * comm_radius * comm_radius / density).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArenaConfig {
    pub num_agents: usize,
    pub comm_radius: f64,
    pub density: f64,
    /// m/s
    pub speed: f64,
    pub diameter: f64,
    /// s
    pub step_duration: f64,
    pub turn_probability: f64,
    /// Peer-avoidance distance as a multiple of the diameter.
    pub avoidance_factor: f64,
}

impl Default for ArenaConfig {
    fn default() -> Self {
        Self {
            num_agents: 15,
            comm_radius: 0.7,
            density: 1.0,
            speed: 0.1,
            diameter: 0.14,
            step_duration: 0.1,
            turn_probability: 0.01,
            avoidance_factor: 1.5,
        }
    }
}

impl ArenaConfig {
    pub fn side_length(&self) -> f64 {
        arena_side_length(self.num_agents, self.comm_radius, self.density)
    }

    pub fn step_length(&self) -> f64 {
        self.speed * self.step_duration
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |msg: String| Err(WorldError::InvalidConfig(msg));
        if self.num_agents == 0 {
            return bad("num_agents must be >= 1".into());
        }
        for (name, v) in [
            ("comm_radius", self.comm_radius),
            ("density", self.density),
            ("diameter", self.diameter),
            ("step_duration", self.step_duration),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.speed >= 0.0 && self.speed.is_finite()) {
            return bad(format!("speed must be >= 0, got {}", self.speed));
        }
        if !(0.0..=1.0).contains(&self.turn_probability) {
            return bad(format!("turn_probability must be in [0, 1], got {}", self.turn_probability));
        }
        if !(self.avoidance_factor >= 0.0) {
            return bad(format!("avoidance_factor must be >= 0, got {}", self.avoidance_factor));
        }
        if self.diameter >= self.side_length() {
            return bad("robot diameter exceeds the arena".into());
        }
        Ok(())
    }
}

/// Ids within distance `radius` of each agent, self excluded.
pub fn neighbors(positions: &[Point], radius: f64) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); positions.len()];
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            if positions[i].distance(&positions[j]) <= radius {
                sets[i].push(j);
                sets[j].push(i);
            }
        }
    }
    sets
}

fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// One step of diffusion. Turns at random, steers away from approached peers
/// closer than the avoidance distance, reflects off walls, then advances.
/// The centre stays within `[r, L - r]` on both axes.
pub fn diffuse<R: Rng + ?Sized>(
    pose: Pose,
    arena: &ArenaConfig,
    side: f64,
    obstacles: &[Point],
    rng: &mut R,
) -> Pose {
    let mut heading = pose.heading;
    let p = pose.position;
    if rng.random::<f64>() < arena.turn_probability {
        heading += rng.random_range(-PI..PI);
    }

    let threshold = arena.avoidance_factor * arena.diameter;
    let nearest = obstacles
        .iter()
        .map(|o| (o, p.distance(o)))
        .filter(|(_, d)| *d < threshold)
        .min_by(|a, b| a.1.total_cmp(&b.1));
    if let Some((o, _)) = nearest {
        let (dx, dy) = (o.x - p.x, o.y - p.y);
        if dx * heading.cos() + dy * heading.sin() > 0.0 {
            let away = dy.atan2(dx) + PI;
            heading = away + rng.random_range(-PI / 2.0..PI / 2.0);
        }
    }

    let step = arena.step_length();
    let (lo, hi) = (arena.diameter / 2.0, side - arena.diameter / 2.0);
    let (mut vx, mut vy) = (heading.cos(), heading.sin());
    if (p.x + step * vx < lo && vx < 0.0) || (p.x + step * vx > hi && vx > 0.0) {
        vx = -vx;
    }
    if (p.y + step * vy < lo && vy < 0.0) || (p.y + step * vy > hi && vy > 0.0) {
        vy = -vy;
    }
    heading = vy.atan2(vx);
    Pose {
        position: Point::new((p.x + step * vx).clamp(lo, hi), (p.y + step * vy).clamp(lo, hi)),
        heading: wrap_angle(heading),
    }
}

/// Random pose with the whole robot inside the arena.
pub fn random_pose<R: Rng + ?Sized>(arena: &ArenaConfig, side: f64, rng: &mut R) -> Pose {
    let r = arena.diameter / 2.0;
    Pose {
        position: Point::new(rng.random_range(r..side - r), rng.random_range(r..side - r)),
        heading: rng.random_range(-PI..PI),
    }
}

/// All robots of one trial advanced in lockstep.
#[derive(Debug, Clone)]
pub struct Swarm {
    agents: Vec<Agent>,
    motion_rngs: Vec<ChaCha8Rng>,
    comms_rng: ChaCha8Rng,
    arena: ArenaConfig,
    side: f64,
    packet_drop: f64,
    step: u64,
}

impl Swarm {
    pub fn new(
        agents: Vec<Agent>,
        motion_rngs: Vec<ChaCha8Rng>,
        comms_rng: ChaCha8Rng,
        arena: ArenaConfig,
        packet_drop: f64,
    ) -> Self {
        assert_eq!(agents.len(), motion_rngs.len());
        Self {
            side: arena.side_length(),
            agents,
            motion_rngs,
            comms_rng,
            arena,
            packet_drop,
            step: 0,
        }
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn side_length(&self) -> f64 {
        self.side
    }

    pub fn current_step(&self) -> u64 {
        self.step
    }

    pub fn positions(&self) -> Vec<Point> {
        self.agents.iter().map(|a| a.pose.position).collect()
    }

    /// Advances every robot to the next step.
    pub fn step(&mut self, grid: &TileGrid, comms_period: u64) -> Result<(), WorldError> {
        let k = self.step + 1;
        let before = self.positions();
        let threshold = self.arena.avoidance_factor * self.arena.diameter;
        for (i, agent) in self.agents.iter_mut().enumerate() {
            let close: Vec<Point> = before
                .iter()
                .enumerate()
                .filter(|(j, q)| *j != i && q.distance(&before[i]) < threshold)
                .map(|(_, q)| *q)
                .collect();
            agent.pose = diffuse(agent.pose, &self.arena, self.side, &close, &mut self.motion_rngs[i]);
        }

        let inboxes = if comms_period > 0 && k.is_multiple_of(comms_period) {
            Some(self.exchange(k))
        } else {
            None
        };
        for (i, agent) in self.agents.iter_mut().enumerate() {
            agent.step(k, grid, inboxes.as_ref().map(|b| b[i].as_slice()))?;
        }
        self.step = k;
        Ok(())
    }

    fn exchange(&mut self, k: u64) -> Vec<Vec<EstimatePacket>> {
        let packets: Vec<Option<EstimatePacket>> = self.agents.iter().map(|a| a.make_packet(k)).collect();
        let links = neighbors(&self.positions(), self.arena.comm_radius);
        let mut inboxes = vec![Vec::new(); self.agents.len()];
        for (i, inbox) in inboxes.iter_mut().enumerate() {
            for &j in &links[i] {
                let Some(p) = packets[j] else { continue };
                if self.packet_drop > 0.0 && self.comms_rng.random::<f64>() < self.packet_drop {
                    continue;
                }
                inbox.push(p);
            }
        }
        inboxes
    }
}
