//! `tstm`: simulate corpora, fit and apply the time series topic model, and
//! export evaluation reports.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Failure;

#[derive(Parser)]
#[command(name = "tstm", version, about = "Time series topic model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic corpus and its latent truth.
    Simulate(Common),
    /// Run Gibbs chains on a corpus.
    Fit(Common),
    /// Run chains with topics frozen from a checkpoint.
    Infer(Common),
    /// Write rank score, features, mutual information and posterior curves.
    Evaluate(Common),
}

#[derive(Args, Clone, Debug)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue from the last checkpoint of each chain.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    chains: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Stop each chain after this many sweeps without a final checkpoint.
    #[arg(long, hide = true)]
    stop_after: Option<u64>,
}

impl Common {
    fn load(&self) -> anyhow::Result<config::RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => config::RunConfig::load(p)?,
            None => config::RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.gibbs.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.paths.out = o.clone();
        }
        if let Some(c) = self.chains {
            cfg.gibbs.n_chains = c;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let common = match &cli.command {
        Command::Simulate(c) | Command::Fit(c) | Command::Infer(c) | Command::Evaluate(c) => {
            c.clone()
        }
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Failure::validation(anyhow::anyhow!(
                "--threads must be positive"
            )));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::runtime(e.into()))?;
    }
    let cfg = common.load().map_err(Failure::validation)?;
    match cli.command {
        Command::Simulate(_) => commands::simulate(&cfg),
        Command::Fit(_) => commands::fit(&cfg, common.resume, common.stop_after, false),
        Command::Infer(_) => commands::fit(&cfg, common.resume, common.stop_after, true),
        Command::Evaluate(_) => commands::evaluate(&cfg),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
