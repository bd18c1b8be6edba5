//! Decentralized fill-ratio estimation for robot swarms whose ground sensors
//! degrade over time. Each robot estimates the fraction of black tiles in its
//! arena from binary observations, fuses neighbor estimates, and tracks its own
//! sensor accuracy with a constrained extended Kalman filter.

pub mod agent;
pub mod cc;
pub mod config;
pub mod experiment;
pub mod fre;
pub mod metrics;
pub mod oqa;
pub mod sae;
pub mod swarm;
pub mod world;

pub use agent::{Agent, EstimatePacket, FilterConfig, FilterMode, Schedule};
pub use config::{Config, RunMode, TrialConfig};
pub use experiment::{run_config, run_trial, run_trial_quiet, TrialOutcome};
