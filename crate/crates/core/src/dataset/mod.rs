//! KITTI-format dataset reading: binary scans, per-point labels, odometry
//! poses with calibration, and the remapping of raw semantic ids onto the
//! motion (static/moving) and mobility (unmovable/movable) tasks.

mod labels;
mod poses;
mod scan;

pub use labels::{
    ClassMap, MobilityLabel, MotionLabel, PointLabels, RemapStats, TaskLabels, remap_labels,
};
pub use poses::{read_calib, read_poses, write_poses};
pub use scan::{Point, Scan};

use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::PoseError;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: length {len} is not a multiple of the 16-byte point record")]
    BadRecordSize { path: PathBuf, len: u64 },
    #[error("{path}: non-finite value in point {index}")]
    NonFinite { path: PathBuf, index: usize },
    #[error("{path} line {line}: expected 12 numbers (3x4 row-major pose)")]
    BadPoseLine { path: PathBuf, line: usize },
    #[error("{path} line {line}: resulting pose is not rigid: {source}")]
    NonRigidPose {
        path: PathBuf,
        line: usize,
        source: PoseError,
    },
    #[error("{path}: no 'Tr:' entry in calibration file")]
    MissingCalib { path: PathBuf },
    #[error("label count {labels} does not match point count {points}")]
    LabelCountMismatch { labels: usize, points: usize },
    #[error("{path} line {line}: {reason}")]
    BadClassMapLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("class map violates the taxonomy: {0}")]
    BadClassMap(String),
}
