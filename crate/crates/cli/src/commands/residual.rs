use anyhow::{bail, Context, Result};
use clap::Args;
use lidar_mos::projection::project;
use lidar_mos::residual::compute_residual;

use crate::commands::load_sequence;
use crate::config::{CommonOpts, RunConfig};

#[derive(Args, Debug)]
pub struct ResidualArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Only this frame (default: every frame with full history)
    #[arg(long)]
    frame: Option<usize>,
}

pub fn run(args: ResidualArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&args.common)?;
    let seq = load_sequence(&cfg.sequence_dir()?, false)?;
    std::fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating {}", cfg.out.display()))?;

    let stride = cfg.stride_preset.resolve(&cfg.distribution);
    let first = cfg.k * stride;
    let frames: Vec<usize> = match args.frame {
        Some(f) => vec![f],
        None => {
            if first >= seq.scans.len() {
                bail!(
                    "no frame has {} predecessors (k = {}, stride = {}, {} frames)",
                    first,
                    cfg.k,
                    stride,
                    seq.scans.len()
                );
            }
            (first..seq.scans.len()).collect()
        }
    };

    println!("stride = {stride} (preset {:?})", cfg.stride_preset);
    for frame in frames {
        let current = project(&seq.scans[frame], &cfg.proj)?;
        let stack = compute_residual(
            &current,
            frame,
            &seq.scans,
            &seq.poses,
            cfg.k,
            stride,
            &cfg.proj,
        )?;
        let path = cfg.out.join(format!("residual_{frame:06}.bin"));
        stack
            .write(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        let mean = stack.mean_map();
        let (sum, n) = mean
            .indexed_iter()
            .filter(|(px, _)| current.valid[*px])
            .fold((0.0, 0usize), |(s, n), (_, v)| (s + v, n + 1));
        println!(
            "frame {frame:06}: k = {}, mean residual over {} valid pixels = {:.6}",
            stack.frame_count(),
            n,
            if n > 0 { sum / n as f64 } else { 0.0 }
        );
    }
    Ok(())
}
