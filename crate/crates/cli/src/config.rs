//! Run configuration with three-level precedence: built-in defaults,
//! then the optional TOML config file, then command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use lidar_mos::dataset::ClassMap;
use lidar_mos::projection::ProjConfig;
use lidar_mos::residual::{StrideDistribution, StridePreset};
use serde::Deserialize;

/// Flags shared by the pipeline subcommands. Every field is optional so
/// absence can fall through to the config file and defaults.
#[derive(Args, Debug, Clone, Default)]
pub struct CommonOpts {
    /// TOML config file (same keys as the flags)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset root holding sequences/<id>/...
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Sequence id under the root, e.g. 00
    #[arg(long)]
    pub sequence: Option<String>,
    /// Range image height (rows)
    #[arg(long)]
    pub height: Option<usize>,
    /// Range image width (columns)
    #[arg(long)]
    pub width: Option<usize>,
    /// Upper vertical field-of-view bound, degrees
    #[arg(long, allow_hyphen_values = true)]
    pub fov_up: Option<f64>,
    /// Lower vertical field-of-view bound, degrees (negative below horizon)
    #[arg(long, allow_hyphen_values = true)]
    pub fov_down: Option<f64>,
    /// Residual maps per stack
    #[arg(long)]
    pub k: Option<usize>,
    /// Stride values, comma separated
    #[arg(long, value_delimiter = ',')]
    pub strides: Option<Vec<usize>>,
    /// Stride probabilities, comma separated
    #[arg(long, value_delimiter = ',')]
    pub probs: Option<Vec<f64>>,
    /// Evaluation-time stride choice
    #[arg(long, value_parser = ["1", "max"])]
    pub stride_preset: Option<String>,
    /// Baseline decision threshold on the mean residual
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Seed for randomized commands
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Class-map file (key-value text); defaults to the built-in table
    #[arg(long)]
    pub classmap: Option<PathBuf>,
}

/// The same keys, as an optional config file.
#[derive(Deserialize, Debug, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub root: Option<PathBuf>,
    pub sequence: Option<String>,
    pub height: Option<usize>,
    pub width: Option<usize>,
    pub fov_up: Option<f64>,
    pub fov_down: Option<f64>,
    pub k: Option<usize>,
    pub strides: Option<Vec<usize>>,
    pub probs: Option<Vec<f64>>,
    pub stride_preset: Option<String>,
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub classmap: Option<PathBuf>,
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub root: Option<PathBuf>,
    pub sequence: String,
    pub proj: ProjConfig<f64>,
    pub k: usize,
    pub distribution: StrideDistribution,
    pub stride_preset: StridePreset,
    pub threshold: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub classmap: ClassMap,
}

impl RunConfig {
    pub fn resolve(opts: &CommonOpts) -> Result<Self> {
        let file = match &opts.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config file {}", path.display()))?;
                toml::from_str::<FileConfig>(&text)
                    .with_context(|| format!("parsing config file {}", path.display()))?
            }
            None => FileConfig::default(),
        };

        let pick_path = |a: &Option<PathBuf>, b: Option<PathBuf>| a.clone().or(b);
        let strides = opts.strides.clone().or(file.strides).unwrap_or(vec![1, 2, 3]);
        let probs = opts
            .probs
            .clone()
            .or(file.probs)
            .unwrap_or(vec![0.5, 0.25, 0.25]);
        let distribution = StrideDistribution::new(strides, probs)?;

        let preset = opts
            .stride_preset
            .clone()
            .or(file.stride_preset)
            .unwrap_or_else(|| "max".to_string());
        let stride_preset = match preset.as_str() {
            "1" => StridePreset::One,
            "max" => StridePreset::Max,
            other => bail!("unknown stride preset '{other}' (expected 1 or max)"),
        };

        let classmap = match pick_path(&opts.classmap, file.classmap) {
            Some(path) => ClassMap::read(&path)
                .with_context(|| format!("reading class map {}", path.display()))?,
            None => ClassMap::semantic_kitti_mos(),
        };

        let proj = ProjConfig {
            height: opts.height.or(file.height).unwrap_or(64),
            width: opts.width.or(file.width).unwrap_or(2048),
            fov_up_deg: opts.fov_up.or(file.fov_up).unwrap_or(3.0),
            fov_down_deg: opts.fov_down.or(file.fov_down).unwrap_or(-25.0),
        };
        proj.validate()?;

        Ok(Self {
            root: pick_path(&opts.root, file.root),
            sequence: opts
                .sequence
                .clone()
                .or(file.sequence)
                .unwrap_or_else(|| "00".to_string()),
            proj,
            k: opts.k.or(file.k).unwrap_or(8),
            distribution,
            stride_preset,
            threshold: opts.threshold.or(file.threshold).unwrap_or(0.05),
            seed: opts.seed.or(file.seed).unwrap_or(42),
            out: opts.out.clone().or(file.out).unwrap_or_else(|| "out".into()),
            classmap,
        })
    }

    /// Root is optional for commands that only write; the pipeline ones
    /// demand it.
    pub fn require_root(&self) -> Result<&Path> {
        match &self.root {
            Some(root) if root.exists() => Ok(root),
            Some(root) => bail!("dataset root {} does not exist", root.display()),
            None => bail!("--root is required (flag or config file)"),
        }
    }

    pub fn sequence_dir(&self) -> Result<PathBuf> {
        Ok(self
            .require_root()?
            .join("sequences")
            .join(&self.sequence))
    }
}
