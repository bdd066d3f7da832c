//! LiDAR moving-object-segmentation toolkit.
//!
//! The pipeline turns raw scans into supervision-ready inputs and scores
//! predictions end to end:
//!
//! 1. [`dataset`] reads KITTI-format scans, poses and labels and remaps
//!    raw ids onto the motion (static/moving) and mobility
//!    (unmovable/movable) tasks.
//! 2. [`projection`] produces range images with exact per-pixel point
//!    indices; [`residual`] aligns past frames by ego motion and builds
//!    normalized range-difference stacks, with distribution-based frame
//!    stride sampling for augmentation.
//! 3. [`blocks`] and [`siem`] hold forward-only reference kernels of the
//!    2D fusion operators (strip average pooling, rectangular pixel
//!    shuffle, gated channel-attention fusion) and the voxel-space
//!    refinement stage.
//! 4. [`loss`] implements the weighted cross-entropy + Lovász-Softmax
//!    stack, [`metrics`] the confusion-matrix IoU harness.
//! 5. [`synth`] generates deterministic synthetic sequences in the exact
//!    on-disk layout, so everything above is testable against ground
//!    truth without real data.
//!
//! All numeric code is generic over the scalar type via [`Real`]
//! (f32 or f64); concrete aliases live at the crate root.

pub mod blocks;
pub mod dataset;
pub mod geometry;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod oracle;
pub mod projection;
pub mod residual;
pub mod scalar;
pub mod siem;
pub mod synth;

pub use scalar::Real;

pub type ScanF32 = dataset::Scan<f32>;
pub type ScanF64 = dataset::Scan<f64>;
pub type PoseF32 = geometry::Pose<f32>;
pub type PoseF64 = geometry::Pose<f64>;
pub type ProjConfigF32 = projection::ProjConfig<f32>;
pub type ProjConfigF64 = projection::ProjConfig<f64>;
pub type RangeImageF32 = projection::RangeImage<f32>;
pub type RangeImageF64 = projection::RangeImage<f64>;
pub type ResidualStackF32 = residual::ResidualStack<f32>;
pub type ResidualStackF64 = residual::ResidualStack<f64>;
