//! `qndlab`: run estimation experiments from a config file or presets.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qnd_core::config::{exit_code, run, Experiment, RunConfig};
use qnd_core::presets::{preset, PresetName};
use qnd_core::Error;

#[derive(Parser)]
#[command(name = "qndlab", version, about = "Monte-Carlo experiments for QND mixture estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config file or by --experiment.
    Run {
        #[arg(long)]
        experiment: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate one mixture record and report the maximum-likelihood estimate.
    Estimate(Common),
    /// Log-likelihood ratio moments at the local alternative.
    Lamn(Common),
    /// Decay of the non-realized mixture components.
    Collapse(Common),
    /// Error quantiles of the MLE along n.
    Consistency(Common),
    /// Efficiency of the MLE against the inverse Fisher information.
    CramerRao(Common),
    /// Posterior purification along mixture records.
    Purify(Common),
    /// Ten MLE paths converging to the true parameter.
    Fig1(Common),
    /// List the built-in presets.
    Presets,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long)]
    workers: Option<usize>,
}

fn build_config(experiment: Option<Experiment>, c: &Common) -> Result<RunConfig, Error> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(experiment.ok_or_else(|| {
            Error::Config("no experiment given: pass --config or --experiment".into())
        })?),
    };
    if let Some(e) = experiment {
        cfg.experiment = e;
    }
    if let Some(p) = &c.preset {
        cfg.model = qnd_core::config::ModelSpec { preset: Some(p.clone()), ..Default::default() };
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = Some(o.clone());
    }
    if let Some(r) = c.reps {
        cfg.n_reps = Some(r);
    }
    if let Some(g) = &c.n_grid {
        cfg.n_grid = Some(g.clone());
    }
    if let Some(w) = c.workers {
        cfg.workers = Some(w);
    }
    Ok(cfg)
}

fn list_presets() -> Result<(), Error> {
    for name in [PresetName::ToyHaroche, PresetName::ToyHarocheVisibility, PresetName::QubitRotation] {
        let p = preset(name)?;
        println!(
            "{:<24} l={} d={} D={} theta*={:?} search box {:?}..{:?}",
            name.as_str(),
            p.family.alphabet_size(),
            p.family.n_components(),
            p.family.dim(),
            p.theta_star,
            p.search_box.lower(),
            p.search_box.upper()
        );
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<bool, Error> {
    let (experiment, common) = match cli.command {
        Command::Presets => return list_presets().map(|_| true),
        Command::Run { experiment, common } => (experiment.map(|e| e.parse()).transpose()?, common),
        Command::Estimate(c) => (Some(Experiment::Estimate), c),
        Command::Lamn(c) => (Some(Experiment::Lamn), c),
        Command::Collapse(c) => (Some(Experiment::Collapse), c),
        Command::Consistency(c) => (Some(Experiment::Consistency), c),
        Command::CramerRao(c) => (Some(Experiment::CramerRao), c),
        Command::Purify(c) => (Some(Experiment::Purify), c),
        Command::Fig1(c) => (Some(Experiment::Fig1), c),
    };
    let cfg = build_config(experiment, &common)?;
    let outcome = run(&cfg)?;
    println!(
        "{}: {} ({} artifacts in {})",
        outcome.experiment,
        if outcome.passed { "PASS" } else { "FAIL" },
        outcome.artifacts.len(),
        cfg.output_dir().display()
    );
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
