use anyhow::Result;
use clap::Args;
use lidar_mos::residual::sample_stride;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{CommonOpts, RunConfig};

#[derive(Args, Debug)]
pub struct AugmentArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Number of strides to draw
    #[arg(long, default_value_t = 100_000)]
    draws: usize,
}

pub fn run(args: AugmentArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&args.common)?;
    let dist = &cfg.distribution;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut counts = vec![0usize; dist.strides().len()];
    for _ in 0..args.draws {
        let s = sample_stride(dist, &mut rng);
        let idx = dist.strides().iter().position(|v| *v == s).unwrap();
        counts[idx] += 1;
    }

    println!("seed = {}", cfg.seed);
    println!("draws = {}", args.draws);
    for ((stride, p), count) in dist
        .strides()
        .iter()
        .zip(dist.probabilities())
        .zip(&counts)
    {
        println!(
            "stride {stride}: {count} ({:.5}, target {p})",
            *count as f64 / args.draws as f64
        );
    }
    Ok(())
}
