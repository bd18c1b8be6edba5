//! Trial execution and CSV output: seeded trials, matched filter-mode pairs,
//! Cartesian sweeps and the black-observation probability grid.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::agent::{Agent, FilterMode};
use crate::config::{Config, ConfigError, RunMode, TrialConfig};
use crate::metrics::{self, Phase, PhaseBoundary, StepMetrics};
use crate::swarm::{self, stream_rng, streams, Swarm};
use crate::world::{self, SensorState, TileGrid, WorldError};

pub const TRAJECTORY_HEADER: [&str; 8] = ["k", "agent", "b_true", "b_assumed", "x_informed", "x_wma", "n", "t"];
pub const METRICS_HEADER: [&str; 3] = ["k", "delta_x", "delta_b"];
pub const SUMMARY_HEADER: [&str; 6] = ["config_hash", "trial", "phase", "zeta_x", "zeta_b", "delta_zeta_x"];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("sweep grid is empty")]
    EmptyGrid,
}

/// `%.9g`-style formatting: nine significant digits, trailing zeros removed,
/// exponent form outside `[1e-4, 1e9)`.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    trim_zeros(&format!("{x:.*}", (8 - exp) as usize)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Recorded output of one trial in one filter mode.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub mode: FilterMode,
    pub trial: u64,
    pub realized_fill_ratio: f64,
    pub boundary: PhaseBoundary,
    pub metrics: Vec<StepMetrics>,
}

impl TrialOutcome {
    /// `(ζ_x, ζ_b)` for a phase, `None` when no step was recorded in it.
    pub fn zeta(&self, phase: Phase) -> Option<(f64, f64)> {
        let x = metrics::phase_nrmsd(&self.metrics, &self.boundary, phase, |m| m.delta_x).ok()?;
        let b = metrics::phase_nrmsd(&self.metrics, &self.boundary, phase, |m| m.delta_b).ok()?;
        Some((x, b))
    }
}

/// Builds the grid and swarm of trial `m`. Grid, motion and sensor streams do
/// not depend on the filter mode, so both modes see the same world.
pub fn build_trial(cfg: &TrialConfig, mode: FilterMode, m: u64) -> Result<(TileGrid, Swarm), ExperimentError> {
    let seed = cfg.trial_seed(m);
    let side = cfg.arena.side_length();
    let grid = TileGrid::generate(side, cfg.tile_size, cfg.fill_ratio, &mut stream_rng(seed, streams::GRID))?;
    let mut agents = Vec::with_capacity(cfg.arena.num_agents);
    let mut motion = Vec::with_capacity(cfg.arena.num_agents);
    for id in 0..cfg.arena.num_agents {
        let mut motion_rng = stream_rng(seed, streams::motion(id));
        let pose = swarm::random_pose(&cfg.arena, side, &mut motion_rng);
        let sensor = SensorState::new(cfg.initial_accuracy, cfg.degradation)?;
        agents.push(Agent::new(
            id,
            pose,
            sensor,
            cfg.filter,
            mode,
            stream_rng(seed, streams::sensor(id)),
        ));
        motion.push(motion_rng);
    }
    let swarm = Swarm::new(
        agents,
        motion,
        stream_rng(seed, streams::COMMS),
        cfg.arena,
        cfg.packet_drop,
    );
    Ok((grid, swarm))
}

fn record_step(cfg: &TrialConfig, k: u64) -> bool {
    k > 0 && (cfg.full_rate || k.is_multiple_of(cfg.filter.schedule.filter))
}

/// Runs trial `m` to `K_max`. `on_step` sees the swarm after every step and
/// is told whether the step falls on the recording cadence.
pub fn run_trial(
    cfg: &TrialConfig,
    mode: FilterMode,
    m: u64,
    on_step: &mut dyn FnMut(u64, &Swarm, bool) -> Result<(), ExperimentError>,
) -> Result<TrialOutcome, ExperimentError> {
    let (grid, mut swarm) = build_trial(cfg, mode, m)?;
    let f = grid.realized_fill_ratio();
    let mut series = Vec::new();
    let mut informed = vec![0.0; cfg.arena.num_agents];
    let mut assumed = vec![0.0; cfg.arena.num_agents];
    let mut truth = vec![0.0; cfg.arena.num_agents];
    for k in 1..=cfg.steps {
        swarm.step(&grid, cfg.filter.schedule.comms)?;
        let record = record_step(cfg, k);
        if record {
            for (i, a) in swarm.agents().iter().enumerate() {
                informed[i] = a.informed_estimate();
                assumed[i] = a.assumed_accuracy();
                truth[i] = a.true_accuracy();
            }
            series.push(StepMetrics {
                step: k,
                delta_x: metrics::step_rmsd(&informed, f).expect("non-empty swarm"),
                delta_b: metrics::paired_rmsd(&assumed, &truth).expect("paired lengths"),
            });
        }
        on_step(k, &swarm, record)?;
    }
    Ok(TrialOutcome {
        mode,
        trial: m,
        realized_fill_ratio: f,
        boundary: metrics::phase_boundary(
            cfg.initial_accuracy,
            cfg.degradation.drift,
            cfg.degradation.lower,
            cfg.steps,
        ),
        metrics: series,
    })
}

/// Runs a trial without any per-step output.
pub fn run_trial_quiet(cfg: &TrialConfig, mode: FilterMode, m: u64) -> Result<TrialOutcome, ExperimentError> {
    run_trial(cfg, mode, m, &mut |_, _, _| Ok(()))
}

pub struct TrajectoryWriter<W: Write> {
    csv: csv::Writer<W>,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(inner: W) -> Result<Self, ExperimentError> {
        let mut csv = csv::Writer::from_writer(inner);
        csv.write_record(TRAJECTORY_HEADER)?;
        Ok(Self { csv })
    }

    pub fn write_step(&mut self, k: u64, swarm: &Swarm) -> Result<(), ExperimentError> {
        for a in swarm.agents() {
            let counts = a.filter().counts;
            self.csv.write_record([
                k.to_string(),
                a.id().to_string(),
                format_float(a.true_accuracy()),
                format_float(a.assumed_accuracy()),
                format_float(a.informed_estimate()),
                format_float(a.reference_estimate()),
                counts.black.to_string(),
                counts.total.to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), ExperimentError> {
        self.csv.flush()?;
        Ok(())
    }
}

pub fn write_metrics<W: Write>(inner: W, series: &[StepMetrics]) -> Result<(), ExperimentError> {
    let mut csv = csv::Writer::from_writer(inner);
    csv.write_record(METRICS_HEADER)?;
    for m in series {
        csv.write_record([m.step.to_string(), format_float(m.delta_x), format_float(m.delta_b)])?;
    }
    csv.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub config_hash: String,
    pub trial: u64,
    /// `transient`, `equilibrium` or `failed`.
    pub phase: String,
    pub zeta_x: Option<f64>,
    pub zeta_b: Option<f64>,
    pub delta_zeta_x: Option<f64>,
}

impl SummaryRow {
    pub fn failed(&self) -> bool {
        self.phase == "failed"
    }
}

pub fn write_summary<W: Write>(inner: W, rows: &[SummaryRow]) -> Result<(), ExperimentError> {
    let mut csv = csv::Writer::from_writer(inner);
    csv.write_record(SUMMARY_HEADER)?;
    let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
    for r in rows {
        csv.write_record([
            r.config_hash.clone(),
            r.trial.to_string(),
            r.phase.clone(),
            opt(r.zeta_x),
            opt(r.zeta_b),
            opt(r.delta_zeta_x),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// Config of one filter-mode sub-run; its hash labels that sub-run's rows.
pub fn mode_config(config: &Config, mode: FilterMode) -> Config {
    let mut c = config.clone();
    c.set("sim.mode", mode.as_str()).expect("sim.mode is a known key");
    c
}

fn run_one(
    cfg: &TrialConfig,
    mode: FilterMode,
    m: u64,
    hash: &str,
    out_dir: Option<&Path>,
) -> Result<TrialOutcome, ExperimentError> {
    let Some(dir) = out_dir else {
        return run_trial_quiet(cfg, mode, m);
    };
    let file = File::create(dir.join(format!("trajectory_{hash}_{m}.csv")))?;
    let mut writer = TrajectoryWriter::new(io::BufWriter::new(file))?;
    let outcome = run_trial(cfg, mode, m, &mut |k, swarm, record| {
        if record {
            writer.write_step(k, swarm)?;
        }
        Ok(())
    })?;
    writer.finish()?;
    let file = File::create(dir.join(format!("metrics_{hash}_{m}.csv")))?;
    write_metrics(io::BufWriter::new(file), &outcome.metrics)?;
    Ok(outcome)
}

fn trial_rows(config: &Config, cfg: &TrialConfig, m: u64, out_dir: Option<&Path>) -> Vec<SummaryRow> {
    let modes = cfg.mode.filter_modes();
    let hashes: Vec<String> = modes.iter().map(|md| mode_config(config, *md).hash()).collect();
    let mut outcomes = Vec::new();
    let mut rows = Vec::new();
    for (mode, hash) in modes.iter().zip(&hashes) {
        match run_one(cfg, *mode, m, hash, out_dir) {
            Ok(o) => outcomes.push(o),
            Err(e) => {
                eprintln!("trial {m} ({}) failed: {e}", mode.as_str());
                rows.push(SummaryRow {
                    config_hash: hash.clone(),
                    trial: m,
                    phase: "failed".into(),
                    zeta_x: None,
                    zeta_b: None,
                    delta_zeta_x: None,
                });
                return rows;
            }
        }
    }
    for phase in [Phase::Transient, Phase::Equilibrium] {
        let zetas: Vec<Option<(f64, f64)>> = outcomes.iter().map(|o| o.zeta(phase)).collect();
        let delta = match (cfg.mode, zetas.as_slice()) {
            (RunMode::Both, [Some(bayes), Some(ablation)]) => Some(metrics::nrmsd_difference(bayes.0, ablation.0)),
            _ => None,
        };
        for (i, z) in zetas.iter().enumerate() {
            let Some((zx, zb)) = z else { continue };
            rows.push(SummaryRow {
                config_hash: hashes[i].clone(),
                trial: m,
                phase: phase.as_str().into(),
                zeta_x: Some(*zx),
                zeta_b: Some(*zb),
                delta_zeta_x: if outcomes[i].mode == FilterMode::BayesCpf { delta } else { None },
            });
        }
    }
    rows
}

/// Runs all `M` trials of one configuration, in parallel, and returns the
/// summary rows in trial order. Per-trial CSVs go to `out_dir` when given.
pub fn run_config(config: &Config, out_dir: Option<&Path>) -> Result<Vec<SummaryRow>, ExperimentError> {
    let cfg = config.to_trial()?;
    let rows: Vec<Vec<SummaryRow>> = (0..cfg.trials)
        .into_par_iter()
        .map(|m| trial_rows(config, &cfg, m, out_dir))
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Expands a grid file into configurations. Comma-separated values are
/// combined as a Cartesian product, in file order, over `base`.
pub fn expand_grid(base: &Config, grid_text: &str) -> Result<Vec<Config>, ExperimentError> {
    let mut configs = vec![base.clone()];
    for (key, value) in crate::config::parse_lines(grid_text)? {
        let choices: Vec<&str> = value.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        let mut next = Vec::with_capacity(configs.len() * choices.len());
        for c in &configs {
            for v in &choices {
                let mut c = c.clone();
                c.set(&key, v)?;
                next.push(c);
            }
        }
        configs = next;
    }
    if configs.is_empty() {
        return Err(ExperimentError::EmptyGrid);
    }
    for c in &configs {
        c.to_trial()?;
    }
    Ok(configs)
}

/// Runs every configuration of a sweep and concatenates their summaries.
pub fn run_sweep(configs: &[Config], out_dir: Option<&Path>) -> Result<Vec<SummaryRow>, ExperimentError> {
    if configs.is_empty() {
        return Err(ExperimentError::EmptyGrid);
    }
    let mut rows = Vec::new();
    for c in configs {
        rows.extend(run_config(c, out_dir)?);
    }
    Ok(rows)
}

/// `(b, f, q)` over `b ∈ [0.5, 1]`, `f ∈ [0, 1]` with `resolution` points per
/// axis, `b` varying slowest.
pub fn heatmap_grid(resolution: usize) -> Vec<(f64, f64, f64)> {
    let n = resolution.max(2);
    let step = |i: usize| i as f64 / (n - 1) as f64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let b = 0.5 + 0.5 * step(i);
        for j in 0..n {
            let f = step(j);
            out.push((b, f, world::black_tile_probability(b, f)));
        }
    }
    out
}

pub fn write_heatmap<W: Write>(inner: W, resolution: usize) -> Result<(), ExperimentError> {
    let mut csv = csv::Writer::from_writer(inner);
    csv.write_record(["b", "f", "q"])?;
    for (b, f, q) in heatmap_grid(resolution) {
        csv.write_record([format_float(b), format_float(f), format_float(q)])?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: &str) -> Config {
        let mut c = Config::default();
        c.apply_overrides(&[
            "sim.steps=600",
            "sim.trials=2",
            "sim.num_agents=4",
            &format!("sim.mode={mode}"),
        ])
        .unwrap();
        c
    }

    #[test]
    fn float_format() {
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(0.75), "0.75");
        assert_eq!(format_float(1.0), "1");
        assert_eq!(format_float(1.0 / 3.0), "0.333333333");
        assert_eq!(format_float(-1e-5), "-1e-05");
        assert_eq!(format_float(1.5e-4), "0.00015");
        assert_eq!(format_float(123456789.0), "123456789");
        assert_eq!(format_float(1234567890.0), "1.23456789e+09");
        assert_eq!(format_float(0.9999999999), "1");
    }

    #[test]
    fn heatmap_examples() {
        let g = heatmap_grid(21);
        let at = |b: f64, f: f64| {
            g.iter()
                .find(|(x, y, _)| (x - b).abs() < 1e-12 && (y - f).abs() < 1e-12)
                .unwrap()
                .2
        };
        assert_eq!(at(0.5, 0.95), 0.5);
        assert!((at(1.0, 0.75) - 0.75).abs() < 1e-12);
        assert!((at(0.8, 0.75) - 0.65).abs() < 1e-12);
        assert_eq!(g.len(), 441);
    }

    #[test]
    fn zero_steps_gives_no_rows() {
        let mut c = small("bayescpf");
        c.set("sim.steps", "0").unwrap();
        let cfg = c.to_trial().unwrap();
        let o = run_trial_quiet(&cfg, FilterMode::BayesCpf, 0).unwrap();
        assert!(o.metrics.is_empty());
        assert!(run_config(&c, None).unwrap().is_empty());
    }

    #[test]
    fn cadence_and_phases() {
        let cfg = small("bayescpf").to_trial().unwrap();
        let o = run_trial_quiet(&cfg, FilterMode::BayesCpf, 0).unwrap();
        assert_eq!(o.metrics.len(), 120);
        assert!(o.metrics.iter().all(|m| m.step % 5 == 0));
        let rows = run_config(&small("bayescpf"), None).unwrap();
        // equilibrium is beyond 600 steps
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.phase == "transient" && r.delta_zeta_x.is_none()));
    }

    #[test]
    fn both_mode_shares_world_and_reports_difference() {
        let c = small("both");
        let cfg = c.to_trial().unwrap();
        let a = run_trial_quiet(&cfg, FilterMode::BayesCpf, 1).unwrap();
        let b = run_trial_quiet(&cfg, FilterMode::Ablation, 1).unwrap();
        assert_eq!(a.realized_fill_ratio, b.realized_fill_ratio);
        let rows = run_config(&c, None).unwrap();
        assert_eq!(rows.len(), 4);
        let bayes_hash = mode_config(&c, FilterMode::BayesCpf).hash();
        for r in &rows {
            assert_eq!(r.delta_zeta_x.is_some(), r.config_hash == bayes_hash);
        }
    }

    #[test]
    fn same_trial_same_metrics() {
        let cfg = small("bayescpf").to_trial().unwrap();
        let a = run_trial_quiet(&cfg, FilterMode::BayesCpf, 3).unwrap();
        let b = run_trial_quiet(&cfg, FilterMode::BayesCpf, 3).unwrap();
        assert_eq!(a.metrics, b.metrics);
    }

    #[test]
    fn grid_expansion() {
        let base = Config::default();
        let grid = "model.drift = -0.5e-5, -1e-5, -1.5e-5\nmodel.initial = 0.8,1.0\nsim.fill_ratio = 0.55,0.65,0.75,0.85,0.95\n";
        let configs = expand_grid(&base, grid).unwrap();
        assert_eq!(configs.len(), 30);
        let mut hashes: Vec<String> = configs.iter().map(Config::hash).collect();
        hashes.sort();
        hashes.dedup();
        assert_eq!(hashes.len(), 30);
        assert!(expand_grid(&base, "sim.fill_ratio = 2").is_err());
    }
}
