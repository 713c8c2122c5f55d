//! `tdps`: experiment runner for near-field wideband TD-PS beam focusing.

mod config;
mod run;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "tdps", version, about = "Near-field wideband TD-PS beam focusing experiments")]
struct Cli {
    /// Configuration file (`section.key = value` lines); defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `experiment.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-subcarrier gain profiles and a summary for each N in `profile.n_sweep`.
    Profile,
    /// Gain over a grid of user positions at the `heatmap.freqs` frequencies.
    Heatmap {
        /// Combiner file to evaluate instead of `heatmap.combiner`.
        #[arg(long)]
        combiner: Option<PathBuf>,
    },
    /// Learn phases from center-frequency power measurements.
    Learn,
    /// Search TD delays for learned phases.
    SearchDelays {
        /// Combiner file whose phases seed the search; learns them if absent.
        #[arg(long)]
        phases: Option<PathBuf>,
    },
    /// Print every configuration key with its default value.
    PrintDefaults,
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::parse(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = (|| -> Result<()> {
        if let Command::PrintDefaults = cli.command {
            print!("{}", ExperimentConfig::default().emit(true));
            return Ok(());
        }
        let cfg = load(&cli)?;
        let files = match &cli.command {
            Command::Profile => run::run_profile(&cfg)?,
            Command::Heatmap { combiner } => run::run_heatmap(&cfg, combiner.as_deref())?,
            Command::Learn => run::run_learn(&cfg)?,
            Command::SearchDelays { phases } => run::run_search(&cfg, phases.as_deref())?,
            Command::PrintDefaults => unreachable!(),
        };
        for f in files {
            println!("{}", f.display());
        }
        Ok(())
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
