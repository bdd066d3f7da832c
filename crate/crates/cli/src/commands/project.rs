use anyhow::{Context, Result};
use clap::Args;
use lidar_mos::projection::{project, range_to_gray, write_range_image};

use crate::commands::load_sequence;
use crate::config::{CommonOpts, RunConfig};

#[derive(Args, Debug)]
pub struct ProjectArgs {
    #[command(flatten)]
    common: CommonOpts,
    /// Also write grayscale range previews
    #[arg(long)]
    png: bool,
}

pub fn run(args: ProjectArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&args.common)?;
    let seq = load_sequence(&cfg.sequence_dir()?, false)?;
    std::fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating {}", cfg.out.display()))?;

    for (i, scan) in seq.scans.iter().enumerate() {
        let image = project(scan, &cfg.proj)?;
        let path = cfg.out.join(format!("range_{i:06}.bin"));
        write_range_image(&path, &image)
            .with_context(|| format!("writing {}", path.display()))?;
        if args.png {
            let gray = range_to_gray(&image);
            let (h, w) = gray.dim();
            let buf = image::GrayImage::from_raw(
                w as u32,
                h as u32,
                gray.into_raw_vec_and_offset().0,
            )
            .expect("buffer matches dimensions");
            buf.save(cfg.out.join(format!("range_{i:06}.png")))?;
        }
        println!(
            "frame {i:06}: {} points, {} valid pixels, {} skipped",
            scan.len(),
            image.valid_count(),
            image.skipped
        );
    }
    Ok(())
}
