use anyhow::{Context, Result};
use clap::Args;
use lidar_mos::synth::{gen_sequence, scenes, write_kitti_sequence};

use crate::config::{CommonOpts, RunConfig};

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Scene preset
    #[arg(long, value_parser = ["static-arena", "moving-box"], default_value = "moving-box")]
    scene: String,
    /// Frames to generate
    #[arg(long, default_value_t = 20)]
    frames: usize,
}

pub fn run(args: SynthArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&args.common)?;
    let scene = match args.scene.as_str() {
        "static-arena" => scenes::static_arena::<f64>(cfg.seed),
        _ => scenes::moving_box::<f64>(cfg.seed),
    };
    let frames = gen_sequence(&scene, args.frames)?;

    let dir = cfg.out.join("sequences").join(&cfg.sequence);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_kitti_sequence(&dir, &frames)?;

    println!("seed = {}", cfg.seed);
    println!("scene = {}", args.scene);
    println!("wrote {} frames to {}", frames.len(), dir.display());
    for (i, f) in frames.iter().enumerate() {
        println!("frame {i:06}: {} points", f.scan.len());
    }
    Ok(())
}
