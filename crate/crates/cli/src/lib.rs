//! Config-driven command-line front end for canonlab experiments.
//!
//! Each command reads one TOML [`RunConfig`] and writes its outputs plus a
//! `manifest.json` to `<out>/<command>/<config-hash>/`.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use error::CliError;
pub use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "canonlab", version, about = "Caption canonicalization laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset
    Synth(RunArgs),
    /// Canonicalize a dataset
    Canon(RunArgs),
    /// Train the dual encoders
    Train(RunArgs),
    /// Evaluate retrieval
    Eval(RunArgs),
    /// Supervision-noise measurements
    Noise(RunArgs),
    /// Linguistic analyses of the canonical mapping
    Ling(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Canon(_) => "canon",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Noise(_) => "noise",
            Command::Ling(_) => "ling",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Synth(a)
            | Command::Canon(a)
            | Command::Train(a)
            | Command::Eval(a)
            | Command::Noise(a)
            | Command::Ling(a) => a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, clap::Args)]
pub struct RunArgs {
    /// Path to the run configuration (TOML)
    pub config: PathBuf,
    /// Override every seed in the configuration
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output root directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs one command and returns its manifest.
pub fn run(command: &Command) -> Result<RunManifest, CliError> {
    let args = command.args();
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.apply_seed(seed);
    }
    cfg.validate()?;
    let hash = cfg.hash();
    let base = args.config.parent().unwrap_or(Path::new(".")).to_path_buf();
    cfg.resolve_paths(&base);
    let out = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    let mut dir = manifest::RunDir::create(&out, command.name(), &hash, cfg.seed)?;
    match command {
        Command::Synth(_) => commands::synth(&cfg, &mut dir)?,
        Command::Canon(_) => commands::canon(&cfg, &mut dir)?,
        Command::Train(_) => commands::train(&cfg, &mut dir)?,
        Command::Eval(_) => commands::eval(&cfg, &mut dir)?,
        Command::Noise(_) => commands::noise(&cfg, &mut dir)?,
        Command::Ling(_) => commands::ling(&cfg, &mut dir)?,
    }
    dir.finish()
}
