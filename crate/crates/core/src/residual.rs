//! Ego-compensated residual maps and the frame-stride sampler.
//!
//! A residual map compares the current range image against a past scan
//! that was rigidly transformed into the current sensor frame and
//! re-projected. At every pixel where both images are valid the value is
//! the normalized absolute range difference
//!
//! ```text
//! |r_past − r_current| / r_current
//! ```
//!
//! and 0 elsewhere. Valid pixels always have positive range, so the ratio
//! is well defined. A stack holds k such maps for past frames at offsets
//! j·Δt, j = 1..k; map j compares frame (current − j·Δt) against the
//! current frame. Values are stored unclamped; clamping is for display
//! only.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::Scan;
use crate::geometry::{relative_pose, Pose};
use crate::projection::{project, ProjConfig, ProjectionError, RangeImage};
use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum ResidualError {
    #[error(
        "frame {frame} needs {needed} predecessors for k = {k} at stride {stride}, \
         short by {shortfall} frames"
    )]
    InsufficientHistory {
        frame: usize,
        k: usize,
        stride: usize,
        needed: usize,
        shortfall: usize,
    },
    #[error("frame {frame} is out of range for a sequence of {len} frames")]
    FrameOutOfRange { frame: usize, len: usize },
    #[error("sequence has {scans} scans but {poses} poses")]
    SequenceMismatch { scans: usize, poses: usize },
    #[error("residual inputs are {a_h}×{a_w} vs {b_h}×{b_w}")]
    ShapeMismatch {
        a_h: usize,
        a_w: usize,
        b_h: usize,
        b_w: usize,
    },
    #[error("stride distribution: {0}")]
    BadDistribution(String),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
}

/// k residual maps at one frame stride.
#[derive(Debug, Clone)]
pub struct ResidualStack<S> {
    maps: Vec<Array2<S>>,
    stride: usize,
}

impl<S: Real> ResidualStack<S> {
    pub fn new(maps: Vec<Array2<S>>, stride: usize) -> Self {
        Self { maps, stride }
    }

    pub fn maps(&self) -> &[Array2<S>] {
        &self.maps
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn frame_count(&self) -> usize {
        self.maps.len()
    }

    /// Mean over the k maps at every pixel.
    pub fn mean_map(&self) -> Array2<S> {
        let dims = self.maps[0].dim();
        let mut acc = Array2::<S>::zeros(dims);
        for m in &self.maps {
            acc = acc + m;
        }
        let k = real::<S>(self.maps.len() as f64);
        acc.mapv_into(|v| v / k)
    }

    /// Copy with values capped at `ceiling`; display helper only, the
    /// pipeline consumes unclamped values.
    pub fn clamped(&self, ceiling: S) -> Self {
        Self {
            maps: self
                .maps
                .iter()
                .map(|m| m.mapv(|v| v.min(ceiling)))
                .collect(),
            stride: self.stride,
        }
    }

    /// Binary layout: header H, W, k, stride (little-endian u32), then
    /// k·H·W little-endian f32, map-major, row-major within a map.
    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let (h, wd) = self.maps[0].dim();
        crate::io::write_u32s(
            &mut w,
            &[
                h as u32,
                wd as u32,
                self.maps.len() as u32,
                self.stride as u32,
            ],
        )?;
        for m in &self.maps {
            crate::io::write_f32s(&mut w, m.iter().copied())?;
        }
        w.flush()
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut r)
    }

    pub fn read_from(r: &mut impl Read) -> std::io::Result<Self> {
        let head = crate::io::read_u32s(r, 4)?;
        let (h, w, k, stride) = (
            head[0] as usize,
            head[1] as usize,
            head[2] as usize,
            head[3] as usize,
        );
        let mut maps = Vec::with_capacity(k);
        for _ in 0..k {
            let data = crate::io::read_f32s(r, h * w)?;
            maps.push(
                Array2::from_shape_vec((h, w), data)
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?,
            );
        }
        Ok(Self { maps, stride })
    }
}

/// Applies a rigid transform to every point; remission is preserved.
pub fn transform_scan<S: Real>(scan: &Scan<S>, pose: &Pose<S>) -> Scan<S> {
    Scan {
        points: scan
            .points
            .iter()
            .map(|p| {
                let [x, y, z] = pose.transform_point([p.x, p.y, p.z]);
                crate::dataset::Point {
                    x,
                    y,
                    z,
                    remission: p.remission,
                }
            })
            .collect(),
    }
}

/// One residual map from two aligned range images.
pub fn residual_map<S: Real>(
    current: &RangeImage<S>,
    past: &RangeImage<S>,
) -> Result<Array2<S>, ResidualError> {
    if (current.height, current.width) != (past.height, past.width) {
        return Err(ResidualError::ShapeMismatch {
            a_h: current.height,
            a_w: current.width,
            b_h: past.height,
            b_w: past.width,
        });
    }
    Ok(Array2::from_shape_fn(
        (current.height, current.width),
        |px| {
            if current.valid[px] && past.valid[px] {
                (past.range[px] - current.range[px]).abs() / current.range[px]
            } else {
                S::zero()
            }
        },
    ))
}

/// Builds the k-frame residual stack for `frame` at the given stride.
/// Past scans are aligned into the current frame via the relative pose,
/// re-projected with `cfg`, and differenced. The per-frame work runs in
/// parallel; maps are assembled in frame order.
pub fn compute_residual<S: Real>(
    current: &RangeImage<S>,
    frame: usize,
    scans: &[Scan<S>],
    poses: &[Pose<S>],
    k: usize,
    stride: usize,
    cfg: &ProjConfig<S>,
) -> Result<ResidualStack<S>, ResidualError> {
    if scans.len() != poses.len() {
        return Err(ResidualError::SequenceMismatch {
            scans: scans.len(),
            poses: poses.len(),
        });
    }
    if frame >= scans.len() {
        return Err(ResidualError::FrameOutOfRange {
            frame,
            len: scans.len(),
        });
    }
    let needed = k * stride;
    if frame < needed {
        return Err(ResidualError::InsufficientHistory {
            frame,
            k,
            stride,
            needed,
            shortfall: needed - frame,
        });
    }
    let maps = (1..=k)
        .into_par_iter()
        .map(|j| {
            let past = frame - j * stride;
            let rel = relative_pose(&poses[past], &poses[frame]);
            let aligned = transform_scan(&scans[past], &rel);
            let past_image = project(&aligned, cfg)?;
            residual_map(current, &past_image)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ResidualStack::new(maps, stride))
}

/// Frame-stride values with their sampling probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct StrideDistribution {
    strides: Vec<usize>,
    probabilities: Vec<f64>,
}

impl StrideDistribution {
    pub fn new(strides: Vec<usize>, probabilities: Vec<f64>) -> Result<Self, ResidualError> {
        let bad = |msg: String| Err(ResidualError::BadDistribution(msg));
        if strides.is_empty() {
            return bad("no strides given".into());
        }
        if strides.len() != probabilities.len() {
            return bad(format!(
                "{} strides but {} probabilities",
                strides.len(),
                probabilities.len()
            ));
        }
        if strides[0] == 0 || strides.windows(2).any(|w| w[0] >= w[1]) {
            return bad("strides must be positive and strictly ascending".into());
        }
        if probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("probabilities must lie in [0, 1]".into());
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("probabilities sum to {sum}, expected 1"));
        }
        Ok(Self {
            strides,
            probabilities,
        })
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn max_stride(&self) -> usize {
        *self.strides.last().unwrap()
    }
}

impl Default for StrideDistribution {
    /// Strides 1, 2, 3 with probabilities 0.5, 0.25, 0.25 — the best
    /// training distribution found in ablation.
    fn default() -> Self {
        Self::new(vec![1, 2, 3], vec![0.5, 0.25, 0.25]).unwrap()
    }
}

/// Named evaluation-time stride choices: Δt = 1, or the largest stride of
/// the training distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StridePreset {
    One,
    Max,
}

impl StridePreset {
    pub fn resolve(&self, dist: &StrideDistribution) -> usize {
        match self {
            StridePreset::One => 1,
            StridePreset::Max => dist.max_stride(),
        }
    }
}

/// Draws one stride; a pure function of the distribution and the RNG
/// state.
pub fn sample_stride(dist: &StrideDistribution, rng: &mut impl Rng) -> usize {
    let x: f64 = rng.random();
    let mut acc = 0.0;
    for (stride, p) in dist.strides.iter().zip(&dist.probabilities) {
        acc += p;
        if x < acc {
            return *stride;
        }
    }
    *dist.strides.last().unwrap()
}

/// Scans plus their poses, both in the sensor frame and frame-indexed.
#[derive(Debug, Clone, Default)]
pub struct SequenceData<S> {
    pub scans: Vec<Scan<S>>,
    pub poses: Vec<Pose<S>>,
}

/// What to do when a drawn stride does not fit the available history.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryPolicy {
    /// Fail with the shortfall.
    Strict,
    /// Shrink the stride to the largest value with k predecessors
    /// available (at least 1; fails only when even stride 1 is short).
    ClampStride,
}

/// One training sample: draws a stride from the distribution, projects
/// the current frame and builds its residual stack.
pub fn build_training_input<S: Real>(
    seq: &SequenceData<S>,
    frame: usize,
    k: usize,
    dist: &StrideDistribution,
    rng: &mut impl Rng,
    cfg: &ProjConfig<S>,
    policy: HistoryPolicy,
) -> Result<(RangeImage<S>, ResidualStack<S>), ResidualError> {
    if frame >= seq.scans.len() {
        return Err(ResidualError::FrameOutOfRange {
            frame,
            len: seq.scans.len(),
        });
    }
    let mut stride = sample_stride(dist, rng);
    if policy == HistoryPolicy::ClampStride && k > 0 && frame < k * stride {
        stride = (frame / k).clamp(1, stride);
    }
    let current = project(&seq.scans[frame], cfg)?;
    let stack = compute_residual(&current, frame, &seq.scans, &seq.poses, k, stride, cfg)?;
    Ok((current, stack))
}
