use std::path::Path;

use crate::dataset::DatasetError;
use crate::scalar::{real, Real};

/// One LiDAR return: sensor-frame coordinates in meters plus remission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point<S> {
    pub x: S,
    pub y: S,
    pub z: S,
    pub remission: S,
}

/// Unordered point set of a single LiDAR sweep, in the sensor frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scan<S> {
    pub points: Vec<Point<S>>,
}

impl<S: Real> Scan<S> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// (x, y, z) triples, e.g. for voxelization.
    pub fn positions(&self) -> Vec<[S; 3]> {
        self.points.iter().map(|p| [p.x, p.y, p.z]).collect()
    }

    /// Decodes a raw scan file: 16-byte records of four little-endian f32
    /// (x, y, z, remission).
    pub fn read(path: &Path) -> Result<Self, DatasetError> {
        let bytes = std::fs::read(path).map_err(|source| DatasetError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            ScanDecodeError::BadRecordSize(len) => DatasetError::BadRecordSize {
                path: path.to_owned(),
                len,
            },
            ScanDecodeError::NonFinite(index) => DatasetError::NonFinite {
                path: path.to_owned(),
                index,
            },
        })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ScanDecodeError> {
        if bytes.len() % 16 != 0 {
            return Err(ScanDecodeError::BadRecordSize(bytes.len() as u64));
        }
        let mut points = Vec::with_capacity(bytes.len() / 16);
        for (i, rec) in bytes.chunks_exact(16).enumerate() {
            let f = |o: usize| f32::from_le_bytes(rec[o..o + 4].try_into().unwrap());
            let vals = [f(0), f(4), f(8), f(12)];
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(ScanDecodeError::NonFinite(i));
            }
            points.push(Point {
                x: real(vals[0] as f64),
                y: real(vals[1] as f64),
                z: real(vals[2] as f64),
                remission: real(vals[3] as f64),
            });
        }
        Ok(Self { points })
    }

    /// Encodes back to the on-disk record layout. Reading then writing a
    /// scan file reproduces it byte for byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.points.len() * 16);
        for p in &self.points {
            for v in [p.x, p.y, p.z, p.remission] {
                out.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
            }
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        std::fs::write(path, self.to_bytes()).map_err(|source| DatasetError::Io {
            path: path.to_owned(),
            source,
        })
    }
}

#[derive(Debug)]
pub enum ScanDecodeError {
    BadRecordSize(u64),
    NonFinite(usize),
}
