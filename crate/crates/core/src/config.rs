//! Flat `section.key = value` configuration with command-line overrides,
//! validation into typed trial parameters, and a stable content hash.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{FilterConfig, FilterMode, Schedule};
use crate::cc::AccuracyBounds;
use crate::oqa::{DerivativeWeighting, OqaParams};
use crate::sae::AssumedDegradation;
use crate::swarm::ArenaConfig;
use crate::world::DegradationParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `section.key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("{key}: {message}")]
    InvalidValue { key: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

const DEFAULTS: &[(&str, &str)] = &[
    ("sim.num_agents", "15"),
    ("sim.fill_ratio", "0.75"),
    ("sim.density", "1"),
    ("sim.comm_radius", "0.7"),
    ("sim.steps", "60000"),
    ("sim.trials", "30"),
    ("sim.seed", "0"),
    ("sim.mode", "bayescpf"),
    ("sim.packet_drop", "0"),
    ("world.tile_size", "0.1"),
    ("degradation.drift", "-1e-5"),
    ("degradation.diffusion", "1e-4"),
    ("degradation.initial", "1.0"),
    ("degradation.lower", "0.5"),
    ("degradation.upper", "1.0"),
    ("model.drift", "-1e-5"),
    ("model.diffusion", "1e-4"),
    ("model.initial", "1.0"),
    ("model.initial_variance", "1e-4"),
    ("model.lower", "0.5"),
    ("model.upper", "1.0"),
    ("oqa.sensitivity", "0.02"),
    ("oqa.window", "500"),
    ("oqa.capacity", "1000"),
    ("oqa.literal_derivative", "false"),
    ("fre.split_confidence_accuracy", "false"),
    ("schedule.observe", "5"),
    ("schedule.comms", "5"),
    ("schedule.filter", "5"),
    ("motion.speed", "0.1"),
    ("motion.diameter", "0.14"),
    ("motion.step_duration", "0.1"),
    ("motion.turn_probability", "0.01"),
    ("motion.avoidance_factor", "1.5"),
    ("output.full_rate", "false"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    BayesCpf,
    Ablation,
    Both,
}

impl RunMode {
    pub fn filter_modes(&self) -> &'static [FilterMode] {
        match self {
            RunMode::BayesCpf => &[FilterMode::BayesCpf],
            RunMode::Ablation => &[FilterMode::Ablation],
            RunMode::Both => &[FilterMode::BayesCpf, FilterMode::Ablation],
        }
    }
}

/// Raw key/value configuration. Every known key is always present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            values: DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

/// Splits one `key = value` (or `key=value`) assignment.
pub fn parse_assignment(text: &str) -> Option<(String, String)> {
    let (k, v) = text.split_once('=')?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || v.is_empty() || !k.contains('.') {
        return None;
    }
    Some((k.to_string(), v.to_string()))
}

/// Non-comment, non-blank lines of a config file as assignments.
pub fn parse_lines(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let kv = parse_assignment(line).ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            text: raw.to_string(),
        })?;
        out.push(kv);
    }
    Ok(out)
}

pub fn read_file(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl Config {
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        for (k, v) in parse_lines(text)? {
            c.set(&k, &v)?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_text(&read_file(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(ConfigError::UnknownKey(key.to_string())),
        }
    }

    /// Applies `section.key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<(), ConfigError> {
        for o in overrides {
            let (k, v) = parse_assignment(o.as_ref()).ok_or_else(|| ConfigError::Syntax {
                line: 0,
                text: o.as_ref().to_string(),
            })?;
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    /// Sorted `key = value` lines.
    pub fn canonical(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// First 16 hex digits of the SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.get(key).ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        raw.parse::<T>().map_err(|e| ConfigError::InvalidValue {
            key: key.to_string(),
            message: format!("`{raw}`: {e}"),
        })
    }

    fn float(&self, key: &str) -> Result<f64, ConfigError> {
        let v: f64 = self.parse(key)?;
        if !v.is_finite() {
            return Err(invalid(key, "must be finite"));
        }
        Ok(v)
    }

    /// Validates every field and builds the typed configuration.
    pub fn to_trial(&self) -> Result<TrialConfig, ConfigError> {
        let mode = match self.get("sim.mode").unwrap_or("") {
            "bayescpf" => RunMode::BayesCpf,
            "ablation" => RunMode::Ablation,
            "both" => RunMode::Both,
            other => {
                return Err(invalid(
                    "sim.mode",
                    &format!("expected bayescpf, ablation or both, got `{other}`"),
                ))
            }
        };
        let check = |key: &str, ok: bool, msg: &str| if ok { Ok(()) } else { Err(invalid(key, msg)) };

        let fill_ratio = self.float("sim.fill_ratio")?;
        check("sim.fill_ratio", (0.0..=1.0).contains(&fill_ratio), "must be in [0, 1]")?;
        let packet_drop = self.float("sim.packet_drop")?;
        check("sim.packet_drop", (0.0..=1.0).contains(&packet_drop), "must be in [0, 1]")?;
        let tile_size = self.float("world.tile_size")?;
        check("world.tile_size", tile_size > 0.0, "must be positive")?;

        let degradation = DegradationParams::new(
            self.float("degradation.drift")?,
            self.float("degradation.diffusion")?,
            self.float("degradation.lower")?,
            self.float("degradation.upper")?,
        )
        .map_err(|e| invalid("degradation", &e.to_string()))?;
        let initial_accuracy = self.float("degradation.initial")?;
        check(
            "degradation.initial",
            (degradation.lower..=degradation.upper).contains(&initial_accuracy),
            "must lie within [degradation.lower, degradation.upper]",
        )?;

        let schedule = Schedule {
            observe: self.parse("schedule.observe")?,
            comms: self.parse("schedule.comms")?,
            filter: self.parse("schedule.filter")?,
        };
        for (key, v) in [
            ("schedule.observe", schedule.observe),
            ("schedule.comms", schedule.comms),
            ("schedule.filter", schedule.filter),
        ] {
            check(key, v >= 1, "must be >= 1")?;
        }

        let model_drift = self.float("model.drift")?;
        let model_diffusion = self.float("model.diffusion")?;
        check("model.diffusion", model_diffusion >= 0.0, "must be >= 0")?;
        let bounds = AccuracyBounds::new(self.float("model.lower")?, self.float("model.upper")?)
            .map_err(|e| invalid("model.lower/model.upper", &e.to_string()))?;
        let model_initial = self.float("model.initial")?;
        check(
            "model.initial",
            bounds.contains(model_initial),
            "must lie within [model.lower, model.upper]",
        )?;
        let initial_variance = self.float("model.initial_variance")?;
        check("model.initial_variance", initial_variance >= 0.0, "must be >= 0")?;

        let oqa = OqaParams::new(
            self.float("oqa.sensitivity")?,
            self.parse("oqa.window")?,
            self.parse("oqa.capacity")?,
            schedule.observe,
        )
        .map_err(|e| invalid("oqa", &e.to_string()))?;
        let derivative = if self.parse::<bool>("oqa.literal_derivative")? {
            DerivativeWeighting::Literal
        } else {
            DerivativeWeighting::Mirrored
        };

        let arena = ArenaConfig {
            num_agents: self.parse("sim.num_agents")?,
            comm_radius: self.float("sim.comm_radius")?,
            density: self.float("sim.density")?,
            speed: self.float("motion.speed")?,
            diameter: self.float("motion.diameter")?,
            step_duration: self.float("motion.step_duration")?,
            turn_probability: self.float("motion.turn_probability")?,
            avoidance_factor: self.float("motion.avoidance_factor")?,
        };
        arena.validate().map_err(|e| invalid("sim/motion", &e.to_string()))?;
        check(
            "world.tile_size",
            tile_size <= arena.side_length(),
            "must not exceed the arena side length",
        )?;

        Ok(TrialConfig {
            fill_ratio,
            steps: self.parse("sim.steps")?,
            trials: self.parse("sim.trials")?,
            seed: self.parse("sim.seed")?,
            mode,
            packet_drop,
            tile_size,
            degradation,
            initial_accuracy,
            filter: FilterConfig {
                schedule,
                model: AssumedDegradation::per_activation(model_drift, model_diffusion, schedule.filter),
                initial_accuracy: model_initial,
                initial_variance,
                bounds,
                oqa,
                derivative,
                split_confidence: self.parse("fre.split_confidence_accuracy")?,
            },
            arena,
            full_rate: self.parse("output.full_rate")?,
        })
    }
}

fn invalid(key: &str, message: &str) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        message: message.to_string(),
    }
}

/// Validated parameters of one experiment configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub fill_ratio: f64,
    pub steps: u64,
    pub trials: u64,
    pub seed: u64,
    pub mode: RunMode,
    pub packet_drop: f64,
    pub tile_size: f64,
    pub degradation: DegradationParams,
    pub initial_accuracy: f64,
    pub filter: FilterConfig,
    pub arena: ArenaConfig,
    pub full_rate: bool,
}

impl TrialConfig {
    pub fn trial_seed(&self, m: u64) -> u64 {
        self.seed.wrapping_add(m)
    }
}
