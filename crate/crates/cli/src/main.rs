use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use roughkit_core::experiments::{run_single, ExperimentConfig, Stage};
use roughkit_core::Execution;

#[derive(Parser, Debug)]
#[command(name = "roughkit", version, about = "Rough path toolkit: lifts, controls, sewing, rough PDE solves and Monte Carlo tails")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample (or load) a path and write its signature levels.
    Lift(Opts),
    /// Control tables and greedy points of the lifted path.
    Control(Opts),
    /// Sewing integral of the linear G against the lift.
    Integrate(Opts),
    /// Solve the rough PDE from the first initial datum.
    Solve(Opts),
    /// Cameron-Martin translation of the lift and its tree terms.
    Translate(Opts),
    /// Monte Carlo tail of the greedy count.
    GreedyTail(Opts),
    /// Monte Carlo moments and tail of the solution sup-norm.
    Moments(Opts),
}

#[derive(Args, Debug)]
struct Opts {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    hurst: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    chi: Option<f64>,
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    /// Run samples on one thread.
    #[arg(long)]
    sequential: bool,
}

impl Opts {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::load(&self.config).with_context(|| format!("reading {}", self.config.display()))?;
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        if let Some(v) = self.samples {
            c.samples = v;
        }
        if let Some(v) = self.hurst {
            c.hurst = v;
        }
        if let Some(v) = self.gamma {
            c.gamma = v;
        }
        if let Some(v) = self.p {
            c.p = v;
        }
        if let Some(v) = self.sigma {
            c.sigma = v;
        }
        if let Some(v) = self.chi {
            c.chi = v;
        }
        if let Some(v) = self.modes {
            c.modes = v;
        }
        if let Some(v) = self.grid {
            c.grid = v;
        }
        Ok(c)
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let (stage, opts) = match &cli.command {
        Command::Lift(o) => (Stage::Lift, o),
        Command::Control(o) => (Stage::Control, o),
        Command::Integrate(o) => (Stage::Integrate, o),
        Command::Solve(o) => (Stage::Solve, o),
        Command::Translate(o) => (Stage::Translate, o),
        Command::GreedyTail(o) => (Stage::GreedyTail, o),
        Command::Moments(o) => (Stage::Moments, o),
    };
    let config = opts.config()?;
    let exec = if opts.sequential { Execution::Sequential } else { Execution::default() };
    let files = run_single(&config, stage, exec).with_context(|| format!("{} failed", stage.name()))?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}
