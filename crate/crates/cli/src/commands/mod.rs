pub mod augment;
pub mod baseline;
pub mod blockcheck;
pub mod project;
pub mod residual;
pub mod synth;

use std::path::Path;

use anyhow::{bail, Context, Result};
use lidar_mos::dataset::{read_calib, read_poses, PointLabels, Scan};
use lidar_mos::geometry::Pose;

/// A sequence loaded from the on-disk layout:
/// `velodyne/*.bin`, `poses.txt`, optional `calib.txt` and `labels/*.label`.
pub struct LoadedSequence {
    pub scans: Vec<Scan<f64>>,
    pub poses: Vec<Pose<f64>>,
    pub labels: Option<Vec<PointLabels>>,
}

pub fn load_sequence(dir: &Path, want_labels: bool) -> Result<LoadedSequence> {
    if !dir.exists() {
        bail!("sequence directory {} does not exist", dir.display());
    }
    let scan_files = sorted_files(&dir.join("velodyne"), "bin")?;
    if scan_files.is_empty() {
        bail!("no scan files under {}", dir.join("velodyne").display());
    }
    let mut scans = Vec::with_capacity(scan_files.len());
    for f in &scan_files {
        scans.push(Scan::read(f)?);
    }

    // Calibration defaults to the identity when no calib file ships.
    let calib_path = dir.join("calib.txt");
    let calib: Pose<f64> = if calib_path.exists() {
        read_calib(&calib_path)?
    } else {
        Pose::identity()
    };
    let poses = read_poses(&dir.join("poses.txt"), &calib)?;
    if poses.len() < scans.len() {
        bail!(
            "{} scans but only {} poses in {}",
            scans.len(),
            poses.len(),
            dir.display()
        );
    }

    let labels = if want_labels {
        let label_files = sorted_files(&dir.join("labels"), "label")?;
        if label_files.len() != scans.len() {
            bail!(
                "{} scans but {} label files in {}",
                scans.len(),
                label_files.len(),
                dir.display()
            );
        }
        let mut labels = Vec::with_capacity(label_files.len());
        for (f, scan) in label_files.iter().zip(&scans) {
            let l = PointLabels::read(f)?;
            if l.len() != scan.len() {
                bail!(
                    "{}: {} labels for {} points",
                    f.display(),
                    l.len(),
                    scan.len()
                );
            }
            labels.push(l);
        }
        Some(labels)
    } else {
        None
    };

    Ok(LoadedSequence {
        scans,
        poses,
        labels,
    })
}

fn sorted_files(dir: &Path, extension: &str) -> Result<Vec<std::path::PathBuf>> {
    let entries = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?;
    let mut files: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == extension))
        .collect();
    files.sort();
    Ok(files)
}
