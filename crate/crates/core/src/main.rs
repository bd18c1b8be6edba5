use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bayescpf::config::{self, Config};
use bayescpf::experiment::{self, ExperimentError, SummaryRow};

#[derive(Parser)]
#[command(name = "bayescpf", version, about = "Swarm fill-ratio estimation with degrading sensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `section.key = value` config file
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override, e.g. `--set sim.seed=42`
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Record every control step instead of every filter period
    #[arg(long)]
    full_rate: bool,
}

impl ConfigArgs {
    fn load(&self) -> Result<Config, ExperimentError> {
        let mut c = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        c.apply_overrides(&self.overrides)?;
        if self.full_rate {
            c.set("output.full_rate", "true")?;
        }
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run all trials of one configuration
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
    },
    /// Run a Cartesian sweep described by a grid file
    Sweep {
        grid: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
        /// Also write per-trial trajectory and metrics files
        #[arg(long)]
        trajectories: bool,
    },
    /// Write the black-observation probability over (b, f)
    Heatmap {
        #[arg(long, default_value_t = 51)]
        resolution: usize,
        /// Output file, stdout when absent
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Check a configuration and print its canonical form and hash
    ValidateConfig {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn finish(rows: &[SummaryRow], out: &Path) -> Result<ExitCode, ExperimentError> {
    experiment::write_summary(BufWriter::new(File::create(out.join("summary.csv"))?), rows)?;
    let failed = rows.iter().filter(|r| r.failed()).count();
    if failed > 0 {
        eprintln!("{failed} trial(s) failed");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode, ExperimentError> {
    match cli.command {
        Command::Run { config, out } => {
            let c = config.load()?;
            c.to_trial()?;
            fs::create_dir_all(&out)?;
            let rows = experiment::run_config(&c, Some(&out))?;
            finish(&rows, &out)
        }
        Command::Sweep {
            grid,
            config,
            out,
            trajectories,
        } => {
            let base = config.load()?;
            let configs = experiment::expand_grid(&base, &config::read_file(&grid)?)?;
            fs::create_dir_all(&out)?;
            let rows = experiment::run_sweep(&configs, trajectories.then_some(out.as_path()))?;
            finish(&rows, &out)
        }
        Command::Heatmap { resolution, out } => {
            if resolution < 2 {
                eprintln!("resolution must be at least 2");
                return Ok(ExitCode::FAILURE);
            }
            match out {
                Some(p) => experiment::write_heatmap(BufWriter::new(File::create(p)?), resolution)?,
                None => experiment::write_heatmap(io::stdout().lock(), resolution)?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateConfig { config } => {
            let c = config.load()?;
            c.to_trial()?;
            print!("{}", c.canonical());
            println!("# hash {}", c.hash());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
