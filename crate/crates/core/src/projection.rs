//! Spherical projection of a scan into a range image and back.
//!
//! The projection follows the standard range-view convention: with range
//! r = √(x² + y² + z²), yaw = atan2(y, x) and pitch = asin(z / r),
//!
//! ```text
//! u = ⌊0.5 · (1 − yaw/π) · W⌋           clamped to [0, W−1]
//! v = ⌊(1 − (pitch − fov_down)/fov) · H⌋ clamped to [0, H−1]
//! ```
//!
//! When several points land in one pixel the nearest-range point wins
//! (ties broken by the lower point index), so residual maps compare
//! visible surfaces rather than occluded geometry. Channel values are
//! stored as raw physical quantities; any normalization is left to the
//! consumer.

use std::path::Path;

use ndarray::{Array2, Array3};
use thiserror::Error;

use crate::dataset::{MobilityLabel, MotionLabel, Scan, TaskLabels};
use crate::scalar::{real, Real};

/// Points closer than this are treated as degenerate returns and skipped.
pub const MIN_RANGE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("invalid projection config: {0}")]
    BadConfig(String),
    #[error("grid is {got_h}×{got_w} but the image is {want_h}×{want_w}")]
    GridMismatch {
        got_h: usize,
        got_w: usize,
        want_h: usize,
        want_w: usize,
    },
    #[error("expected {want} per-point entries, got {got}")]
    PointCountMismatch { want: usize, got: usize },
}

/// Geometry of the projection grid. Defaults match the 64-ring sensor
/// used by the odometry benchmark: 64×2048, +3°/−25° vertical field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjConfig<S> {
    pub height: usize,
    pub width: usize,
    pub fov_up_deg: S,
    pub fov_down_deg: S,
}

impl<S: Real> Default for ProjConfig<S> {
    fn default() -> Self {
        Self {
            height: 64,
            width: 2048,
            fov_up_deg: real(3.0),
            fov_down_deg: real(-25.0),
        }
    }
}

impl<S: Real> ProjConfig<S> {
    pub fn validate(&self) -> Result<(), ProjectionError> {
        if self.height < 1 || self.width < 1 {
            return Err(ProjectionError::BadConfig(format!(
                "grid {}×{} must be at least 1×1",
                self.height, self.width
            )));
        }
        if self.fov_up_deg <= self.fov_down_deg {
            return Err(ProjectionError::BadConfig(
                "fov_up must be greater than fov_down".into(),
            ));
        }
        Ok(())
    }

    fn fov_down_rad(&self) -> S {
        self.fov_down_deg.to_radians()
    }

    fn fov_range_rad(&self) -> S {
        (self.fov_up_deg - self.fov_down_deg).to_radians()
    }
}

/// A projected scan: per-pixel channels, the winning point index per
/// pixel, the validity mask, and the pixel every input point projects to.
#[derive(Debug, Clone)]
pub struct RangeImage<S> {
    pub height: usize,
    pub width: usize,
    pub range: Array2<S>,
    pub x: Array2<S>,
    pub y: Array2<S>,
    pub z: Array2<S>,
    pub remission: Array2<S>,
    pub index: Array2<Option<u32>>,
    pub valid: Array2<bool>,
    /// (row, col) of each input point; `None` for skipped zero-range points.
    pub point_pixels: Vec<Option<(u32, u32)>>,
    /// Number of degenerate points that were skipped.
    pub skipped: usize,
}

impl<S: Real> RangeImage<S> {
    pub fn n_points(&self) -> usize {
        self.point_pixels.len()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// Per-point coordinate math, shared by projection and its tests.
struct Projector<S> {
    min_range: S,
    half_w: S,
    inv_pi_half_w: S,
    h: S,
    fov_down: S,
    h_over_fov: S,
    max_u: usize,
    max_v: usize,
}

impl<S: Real> Projector<S> {
    fn new(cfg: &ProjConfig<S>) -> Self {
        let w = real::<S>(cfg.width as f64);
        let h = real::<S>(cfg.height as f64);
        let half_w = w * real(0.5);
        Self {
            min_range: real(MIN_RANGE),
            half_w,
            inv_pi_half_w: half_w / real(std::f64::consts::PI),
            h,
            fov_down: cfg.fov_down_rad(),
            h_over_fov: h / cfg.fov_range_rad(),
            max_u: cfg.width - 1,
            max_v: cfg.height - 1,
        }
    }

    /// Pixel coordinates for one point, or `None` for degenerate ranges.
    #[inline]
    fn pixel_of(&self, x: S, y: S, z: S) -> Option<(u32, u32, S)> {
        let r = (x * x + y * y + z * z).sqrt();
        if r <= self.min_range {
            return None;
        }
        let yaw = y.atan2(x);
        let pitch = (z / r).min(S::one()).max(-S::one()).asin();
        let u = (self.half_w - yaw * self.inv_pi_half_w).floor();
        let v = (self.h - (pitch - self.fov_down) * self.h_over_fov).floor();
        let clamp = |val: S, max: usize| -> u32 {
            if val < S::zero() {
                0
            } else {
                (val.to_usize().unwrap_or(max).min(max)) as u32
            }
        };
        Some((clamp(v, self.max_v), clamp(u, self.max_u), r))
    }
}

/// Projects a scan into a range image.
pub fn project<S: Real>(scan: &Scan<S>, cfg: &ProjConfig<S>) -> Result<RangeImage<S>, ProjectionError> {
    cfg.validate()?;
    let dims = (cfg.height, cfg.width);
    let width = cfg.width;
    let mut image = RangeImage {
        height: cfg.height,
        width: cfg.width,
        range: Array2::zeros(dims),
        x: Array2::zeros(dims),
        y: Array2::zeros(dims),
        z: Array2::zeros(dims),
        remission: Array2::zeros(dims),
        index: Array2::from_elem(dims, None),
        valid: Array2::from_elem(dims, false),
        point_pixels: Vec::with_capacity(scan.len()),
        skipped: 0,
    };
    let projector = Projector::new(cfg);
    {
        // Flat views keep the hot loop free of 2D index arithmetic.
        let range = image.range.as_slice_mut().unwrap();
        let xs = image.x.as_slice_mut().unwrap();
        let ys = image.y.as_slice_mut().unwrap();
        let zs = image.z.as_slice_mut().unwrap();
        let rem = image.remission.as_slice_mut().unwrap();
        let index = image.index.as_slice_mut().unwrap();
        let valid = image.valid.as_slice_mut().unwrap();
        for (i, p) in scan.points.iter().enumerate() {
            let Some((v, u, r)) = projector.pixel_of(p.x, p.y, p.z) else {
                image.point_pixels.push(None);
                image.skipped += 1;
                continue;
            };
            image.point_pixels.push(Some((v, u)));
            let at = v as usize * width + u as usize;
            // Ascending index iteration + strict `<` gives the lower index
            // on range ties, independent of any parallel split of the scan.
            if !valid[at] || r < range[at] {
                range[at] = r;
                xs[at] = p.x;
                ys[at] = p.y;
                zs[at] = p.z;
                rem[at] = p.remission;
                index[at] = Some(i as u32);
                valid[at] = true;
            }
        }
    }
    Ok(image)
}

/// Carries a per-pixel grid back to the points of the scan the image was
/// built from: every point receives the value of the pixel it projects
/// to (occluded points included); skipped points receive `default`.
pub fn back_project<S: Real, T: Copy>(
    pixel_values: &Array2<T>,
    image: &RangeImage<S>,
    n_points: usize,
    default: T,
) -> Result<Vec<T>, ProjectionError> {
    let (gh, gw) = pixel_values.dim();
    if (gh, gw) != (image.height, image.width) {
        return Err(ProjectionError::GridMismatch {
            got_h: gh,
            got_w: gw,
            want_h: image.height,
            want_w: image.width,
        });
    }
    if n_points != image.point_pixels.len() {
        return Err(ProjectionError::PointCountMismatch {
            want: image.point_pixels.len(),
            got: n_points,
        });
    }
    Ok(image
        .point_pixels
        .iter()
        .map(|px| match px {
            Some((v, u)) => pixel_values[(*v as usize, *u as usize)],
            None => default,
        })
        .collect())
}

/// Rasterizes task labels: each valid pixel carries the labels of its
/// winning point, invalid pixels carry ignore.
pub fn label_image<S: Real>(
    labels: &TaskLabels,
    image: &RangeImage<S>,
) -> Result<(Array2<MotionLabel>, Array2<MobilityLabel>), ProjectionError> {
    if labels.len() != image.n_points() {
        return Err(ProjectionError::PointCountMismatch {
            want: image.n_points(),
            got: labels.len(),
        });
    }
    let dims = (image.height, image.width);
    let mut motion = Array2::from_elem(dims, MotionLabel::Ignore);
    let mut mobility = Array2::from_elem(dims, MobilityLabel::Ignore);
    for (px, idx) in image.index.indexed_iter() {
        if let Some(i) = idx {
            motion[px] = labels.motion[*i as usize];
            mobility[px] = labels.mobility[*i as usize];
        }
    }
    Ok((motion, mobility))
}

/// Range channel normalized to 0–255 over the valid pixels, for the
/// optional grayscale preview dump. Not load-bearing.
pub fn range_to_gray<S: Real>(image: &RangeImage<S>) -> Array2<u8> {
    let max = image
        .range
        .iter()
        .zip(image.valid.iter())
        .filter(|(_, v)| **v)
        .map(|(r, _)| r.to_f64().unwrap())
        .fold(0.0f64, f64::max);
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    Array2::from_shape_fn((image.height, image.width), |px| {
        if image.valid[px] {
            (image.range[px].to_f64().unwrap() * scale).round().clamp(0.0, 255.0) as u8
        } else {
            0
        }
    })
}

/// Writes the five channels (range, x, y, z, remission) as one tensor in
/// the binary fixture format; the header echoes the grid size.
pub fn write_range_image<S: Real>(path: &Path, image: &RangeImage<S>) -> std::io::Result<()> {
    let mut t = Array3::zeros((5, image.height, image.width));
    for (c, chan) in [&image.range, &image.x, &image.y, &image.z, &image.remission]
        .into_iter()
        .enumerate()
    {
        t.index_axis_mut(ndarray::Axis(0), c).assign(chan);
    }
    crate::io::write_tensor3(path, &t)
}
