//! Library side of the `claprobe` binary. Each subcommand is a plain function
//! taking a [`RunConfig`], so tests can drive it without spawning a process.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

pub use config::{CommandKind, ConfigError, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "claprobe", version, about = "Curvature-of-local-activation probing for piecewise-linear generators")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory. Created if missing.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub generator: Option<PathBuf>,
    #[arg(long, global = true)]
    pub discriminator: Option<PathBuf>,
    /// Clean reference generator used for output comparisons.
    #[arg(long, global = true)]
    pub reference: Option<PathBuf>,
    /// Dotted config override such as `probe.search_bound=10`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Score latent codes by CLA and select high, low and random groups.
    Detect,
    /// Detect, then dampen the highest-CLA units for the high group.
    Correct,
    /// Train a small GAN on a toy dataset and track CLA over training.
    Train,
    /// Grid over probe settings, reporting cost and group metrics.
    Sweep,
    /// Linearize the generator/discriminator pair and classify update cases.
    Geometry,
    /// Precision, recall, realism and path length for the detected groups.
    Eval,
    /// Build a generator with a known artifact unit and its clean counterpart.
    Plant,
}

impl From<Command> for CommandKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Detect => CommandKind::Detect,
            Command::Correct => CommandKind::Correct,
            Command::Train => CommandKind::Train,
            Command::Sweep => CommandKind::Sweep,
            Command::Geometry => CommandKind::Geometry,
            Command::Eval => CommandKind::Eval,
            Command::Plant => CommandKind::Plant,
        }
    }
}

impl Cli {
    /// Config file, then `--set` overrides, then the dedicated flags.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref(), &self.overrides)?;
        cfg.command = Some(self.command.into());
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(p) = &self.generator {
            cfg.model.generator = Some(p.clone());
        }
        if let Some(p) = &self.discriminator {
            cfg.model.discriminator = Some(p.clone());
        }
        if let Some(p) = &self.reference {
            cfg.model.reference = Some(p.clone());
        }
        Ok(cfg)
    }
}

/// Runs the configured command and returns the output directory.
pub fn run_config(cfg: &RunConfig) -> Result<PathBuf> {
    use commands::*;
    match cfg.command()? {
        CommandKind::Detect => drop(detect::cmd_detect(cfg)?),
        CommandKind::Correct => drop(correct::cmd_correct(cfg)?),
        CommandKind::Train => drop(train::cmd_train(cfg)?),
        CommandKind::Sweep => drop(sweep::cmd_sweep(cfg)?),
        CommandKind::Geometry => drop(geometry::cmd_geometry(cfg)?),
        CommandKind::Eval => drop(eval::cmd_eval(cfg)?),
        CommandKind::Plant => drop(plant::cmd_plant(cfg)?),
    }
    Ok(cfg.out_dir()?.to_path_buf())
}

pub fn run(cli: &Cli) -> Result<PathBuf> {
    run_config(&cli.run_config()?)
}

/// 2 for configuration problems, 3 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<cla_core::Error>() {
            if matches!(e, cla_core::Error::InvalidConfig(_) | cla_core::Error::InfeasibleGeometry(_)) {
                return 2;
            }
        }
    }
    3
}
