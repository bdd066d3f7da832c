//! Command-line pipeline for the toolkit: projection, residual stacks,
//! stride sampling, synthetic data generation, the baseline evaluation
//! and the kernel self-check. `MOS_LOG` controls log verbosity.

mod commands;
mod config;

use anyhow::Result;
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "lidar-mos",
    version,
    about = "LiDAR moving-object-segmentation toolkit",
    after_help = "Configuration precedence: command-line flags override the --config file, \
                  which overrides built-in defaults."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Project scans of a sequence into range images
    Project(commands::project::ProjectArgs),
    /// Compute ego-compensated residual stacks for a sequence
    Residual(commands::residual::ResidualArgs),
    /// Draw frame strides from a distribution and report frequencies
    AugmentSample(commands::augment::AugmentArgs),
    /// Generate a synthetic sequence in the on-disk dataset layout
    SynthGen(commands::synth::SynthArgs),
    /// Residual-threshold baseline segmentation with an IoU report
    BaselineEval(commands::baseline::BaselineArgs),
    /// Check the block kernels against their brute-force references
    BlockCheck(commands::blockcheck::BlockCheckArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MOS_LOG", "warn")).init();
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Project(args) => commands::project::run(args),
        Command::Residual(args) => commands::residual::run(args),
        Command::AugmentSample(args) => commands::augment::run(args),
        Command::SynthGen(args) => commands::synth::run(args),
        Command::BaselineEval(args) => commands::baseline::run(args),
        Command::BlockCheck(args) => commands::blockcheck::run(args),
    }
}
