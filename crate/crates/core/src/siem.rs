//! Voxel-space refinement: back-projected point features are voxelized,
//! enhanced by three axis-aligned 3D convolution branches with a skip
//! connection, devoxelized back to points, fused with per-point MLP
//! features and classified.
//!
//! The kernels are forward-only and parameter-supplied, like
//! [`crate::blocks`]. Branches are pure linear maps (no nonlinearity
//! before concatenation) so oracle tests stay exact.

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum SiemError {
    #[error("no points to voxelize")]
    Empty,
    #[error("voxel resolution must be positive, got {0}")]
    BadResolution(f64),
    #[error("{what}: expected {want}, got {got}")]
    LengthMismatch {
        what: &'static str,
        want: usize,
        got: usize,
    },
    #[error("parameter shapes are inconsistent: {0}")]
    BadParams(String),
}

/// Sparse voxel grid over an axis-aligned lattice. Occupied voxels keep
/// their first-appearance order (point order), so layouts are
/// deterministic.
#[derive(Debug, Clone)]
pub struct VoxelGrid<S> {
    resolution: S,
    origin: [S; 3],
    dims: [usize; 3],
    coords: Vec<[usize; 3]>,
    /// (occupied voxels, channels)
    features: Array2<S>,
    counts: Vec<usize>,
    lookup: HashMap<[usize; 3], usize>,
}

impl<S: Real> VoxelGrid<S> {
    pub fn resolution(&self) -> S {
        self.resolution
    }

    pub fn origin(&self) -> [S; 3] {
        self.origin
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn occupied(&self) -> usize {
        self.coords.len()
    }

    pub fn channels(&self) -> usize {
        self.features.dim().1
    }

    pub fn coords(&self) -> &[[usize; 3]] {
        &self.coords
    }

    pub fn features(&self) -> &Array2<S> {
        &self.features
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn slot_of(&self, coord: [usize; 3]) -> Option<usize> {
        self.lookup.get(&coord).copied()
    }

    fn voxel_of(&self, p: [S; 3]) -> Option<[usize; 3]> {
        let mut coord = [0usize; 3];
        for d in 0..3 {
            let idx = ((p[d] - self.origin[d]) / self.resolution).floor();
            let idx = idx.to_f64().unwrap();
            if idx < 0.0 || idx >= self.dims[d] as f64 {
                return None;
            }
            coord[d] = idx as usize;
        }
        Some(coord)
    }

    /// Binary layout: dims (3×u32), channels, occupied count (u32 each),
    /// origin (3×f32), resolution (f32), then per occupied voxel its
    /// coordinate (3×u32) and feature row (channels×f32), in slot order.
    pub fn write(&self, path: &std::path::Path) -> std::io::Result<()> {
        use std::io::Write;
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let c = self.channels();
        crate::io::write_u32s(
            &mut w,
            &[
                self.dims[0] as u32,
                self.dims[1] as u32,
                self.dims[2] as u32,
                c as u32,
                self.occupied() as u32,
            ],
        )?;
        crate::io::write_f32s(&mut w, self.origin.iter().copied())?;
        crate::io::write_f32s(&mut w, std::iter::once(self.resolution))?;
        for (slot, coord) in self.coords.iter().enumerate() {
            crate::io::write_u32s(&mut w, &coord.map(|v| v as u32))?;
            crate::io::write_f32s(&mut w, self.features.row(slot).iter().copied())?;
        }
        w.flush()
    }

    pub fn read(path: &std::path::Path) -> std::io::Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let head = crate::io::read_u32s(&mut r, 5)?;
        let dims = [head[0] as usize, head[1] as usize, head[2] as usize];
        let (c, n) = (head[3] as usize, head[4] as usize);
        let origin_v: Vec<S> = crate::io::read_f32s(&mut r, 3)?;
        let resolution = crate::io::read_f32s::<_, S>(&mut r, 1)?[0];
        let mut coords = Vec::with_capacity(n);
        let mut features = Array2::zeros((n, c));
        let mut lookup = HashMap::with_capacity(n);
        for slot in 0..n {
            let cv = crate::io::read_u32s(&mut r, 3)?;
            let coord = [cv[0] as usize, cv[1] as usize, cv[2] as usize];
            coords.push(coord);
            lookup.insert(coord, slot);
            let row: Vec<S> = crate::io::read_f32s(&mut r, c)?;
            for (j, v) in row.into_iter().enumerate() {
                features[(slot, j)] = v;
            }
        }
        Ok(Self {
            resolution,
            origin: [origin_v[0], origin_v[1], origin_v[2]],
            dims,
            coords,
            features,
            counts: vec![0; n],
            lookup,
        })
    }
}

/// Mean-reduces per-point features into voxels of edge `resolution`.
/// The origin is the point-cloud minimum floored to the voxel lattice.
/// Two passes (slot assignment, then accumulation) in fixed point order
/// keep the result schedule-independent.
pub fn voxelize<S: Real>(
    points: &[[S; 3]],
    features: &Array2<S>,
    resolution: S,
) -> Result<VoxelGrid<S>, SiemError> {
    if points.is_empty() {
        return Err(SiemError::Empty);
    }
    if resolution <= S::zero() {
        return Err(SiemError::BadResolution(resolution.to_f64().unwrap()));
    }
    if features.dim().0 != points.len() {
        return Err(SiemError::LengthMismatch {
            what: "features",
            want: points.len(),
            got: features.dim().0,
        });
    }
    let channels = features.dim().1;

    let mut origin = [S::zero(); 3];
    for d in 0..3 {
        let min = points
            .iter()
            .map(|p| p[d])
            .fold(S::infinity(), S::min);
        origin[d] = (min / resolution).floor() * resolution;
    }

    let voxel_ids: Vec<[usize; 3]> = points
        .iter()
        .map(|p| {
            let mut c = [0usize; 3];
            for d in 0..3 {
                c[d] = ((p[d] - origin[d]) / resolution)
                    .floor()
                    .to_f64()
                    .unwrap()
                    .max(0.0) as usize;
            }
            c
        })
        .collect();
    let mut dims = [0usize; 3];
    for c in &voxel_ids {
        for d in 0..3 {
            dims[d] = dims[d].max(c[d] + 1);
        }
    }

    // Pass 1: slots in first-appearance order.
    let mut lookup: HashMap<[usize; 3], usize> = HashMap::new();
    let mut coords = Vec::new();
    let mut counts = Vec::new();
    for c in &voxel_ids {
        let next = coords.len();
        let slot = *lookup.entry(*c).or_insert(next);
        if slot == next {
            coords.push(*c);
            counts.push(0usize);
        }
        counts[slot] += 1;
    }

    // Pass 2: accumulate and average.
    let mut sums = Array2::<S>::zeros((coords.len(), channels));
    for (i, c) in voxel_ids.iter().enumerate() {
        let slot = lookup[c];
        for j in 0..channels {
            sums[(slot, j)] += features[(i, j)];
        }
    }
    for (slot, count) in counts.iter().enumerate() {
        let n = real::<S>(*count as f64);
        for j in 0..channels {
            sums[(slot, j)] /= n;
        }
    }

    Ok(VoxelGrid {
        resolution,
        origin,
        dims,
        coords,
        features: sums,
        counts,
        lookup,
    })
}

/// One axis-aligned 3-tap convolution branch: taps at offsets −1, 0, +1
/// along its axis, each a (branch_out × channels) matrix, plus a bias.
#[derive(Debug, Clone)]
pub struct AxisConv<S> {
    pub taps: [Array2<S>; 3],
    pub bias: Array1<S>,
}

/// Parameters of the spatial-guided block: three branches (along x, y
/// and z), a 1×1×1 fusion convolution mapping the concatenated branch
/// outputs back to the input channel count, and the fusion bias.
#[derive(Debug, Clone)]
pub struct SgbParams<S> {
    pub branches: [AxisConv<S>; 3],
    pub fuse_weights: Array2<S>,
    pub fuse_bias: Array1<S>,
}

impl<S: Real> SgbParams<S> {
    /// All-zero parameters with the given widths; useful as a skeleton
    /// and for the pure-skip identity check.
    pub fn zeros(branch_out: usize, channels: usize) -> Self {
        let branch = || AxisConv {
            taps: [
                Array2::zeros((branch_out, channels)),
                Array2::zeros((branch_out, channels)),
                Array2::zeros((branch_out, channels)),
            ],
            bias: Array1::zeros(branch_out),
        };
        Self {
            branches: [branch(), branch(), branch()],
            fuse_weights: Array2::zeros((channels, 3 * branch_out)),
            fuse_bias: Array1::zeros(channels),
        }
    }

    pub fn validate(&self, channels: usize) -> Result<usize, SiemError> {
        let branch_out = self.branches[0].taps[0].dim().0;
        for (i, b) in self.branches.iter().enumerate() {
            for t in &b.taps {
                if t.dim() != (branch_out, channels) {
                    return Err(SiemError::BadParams(format!(
                        "branch {i} tap is {:?}, expected ({branch_out}, {channels})",
                        t.dim()
                    )));
                }
            }
            if b.bias.len() != branch_out {
                return Err(SiemError::BadParams(format!(
                    "branch {i} bias has {} entries, expected {branch_out}",
                    b.bias.len()
                )));
            }
        }
        if self.fuse_weights.dim() != (channels, 3 * branch_out) {
            return Err(SiemError::BadParams(format!(
                "fusion weights are {:?}, expected ({channels}, {})",
                self.fuse_weights.dim(),
                3 * branch_out
            )));
        }
        if self.fuse_bias.len() != channels {
            return Err(SiemError::BadParams(format!(
                "fusion bias has {} entries, expected {channels}",
                self.fuse_bias.len()
            )));
        }
        Ok(branch_out)
    }
}

/// Runs the spatial-guided block: three branch convolutions over the
/// voxel lattice (kernels 3×1×1, 1×3×1, 1×1×3, zero padding — empty or
/// out-of-range voxels contribute nothing), channel concatenation, the
/// 1×1×1 fusion convolution, and the additive skip. Occupancy is
/// unchanged. With zero fusion weights and bias the block is the
/// identity.
pub fn sgb_forward<S: Real>(
    grid: &VoxelGrid<S>,
    params: &SgbParams<S>,
) -> Result<VoxelGrid<S>, SiemError> {
    let channels = grid.channels();
    let branch_out = params.validate(channels)?;

    let mut out = grid.clone();
    for (slot, coord) in grid.coords.iter().enumerate() {
        let mut concat = Array1::<S>::zeros(3 * branch_out);
        for (axis, branch) in params.branches.iter().enumerate() {
            for (tap, weights) in branch.taps.iter().enumerate() {
                let offset = tap as isize - 1;
                let nc = neighbor(*coord, axis, offset, grid.dims);
                let Some(nslot) = nc.and_then(|c| grid.slot_of(c)) else {
                    continue;
                };
                for o in 0..branch_out {
                    let mut acc = S::zero();
                    for i in 0..channels {
                        acc += weights[(o, i)] * grid.features[(nslot, i)];
                    }
                    concat[axis * branch_out + o] += acc;
                }
            }
            for o in 0..branch_out {
                concat[axis * branch_out + o] += branch.bias[o];
            }
        }
        for c in 0..channels {
            let mut fused = params.fuse_bias[c];
            for j in 0..3 * branch_out {
                fused += params.fuse_weights[(c, j)] * concat[j];
            }
            out.features[(slot, c)] = grid.features[(slot, c)] + fused;
        }
    }
    Ok(out)
}

fn neighbor(
    coord: [usize; 3],
    axis: usize,
    offset: isize,
    dims: [usize; 3],
) -> Option<[usize; 3]> {
    let v = coord[axis] as isize + offset;
    if v < 0 || v >= dims[axis] as isize {
        return None;
    }
    let mut c = coord;
    c[axis] = v as usize;
    Some(c)
}

/// Looks up, for every point, the feature of the voxel containing it;
/// points in unoccupied voxels (or outside the grid) receive zeros.
pub fn devoxelize<S: Real>(grid: &VoxelGrid<S>, points: &[[S; 3]]) -> Array2<S> {
    let channels = grid.channels();
    let mut out = Array2::zeros((points.len(), channels));
    for (i, p) in points.iter().enumerate() {
        let Some(slot) = grid.voxel_of(*p).and_then(|c| grid.slot_of(c)) else {
            continue;
        };
        for j in 0..channels {
            out[(i, j)] = grid.features[(slot, j)];
        }
    }
    out
}

/// Linear classifier: scores = weights · features + bias.
#[derive(Debug, Clone)]
pub struct Linear<S> {
    /// (classes, channels)
    pub weights: Array2<S>,
    pub bias: Array1<S>,
}

/// Final refinement: the devoxelized grid features are summed with the
/// per-point MLP features and classified. `point_features` is the
/// pre-voxelization input, kept for alignment checking.
pub fn siem_refine<S: Real>(
    point_features: &Array2<S>,
    mlp_features: &Array2<S>,
    grid_features: &Array2<S>,
    classifier: &Linear<S>,
) -> Result<Array2<S>, SiemError> {
    let n = point_features.dim().0;
    for (what, arr) in [("mlp_features", mlp_features), ("grid_features", grid_features)] {
        if arr.dim().0 != n {
            return Err(SiemError::LengthMismatch {
                what,
                want: n,
                got: arr.dim().0,
            });
        }
    }
    let channels = mlp_features.dim().1;
    if grid_features.dim().1 != channels {
        return Err(SiemError::BadParams(format!(
            "grid features have {} channels, mlp features {channels}",
            grid_features.dim().1
        )));
    }
    if classifier.weights.dim().1 != channels {
        return Err(SiemError::BadParams(format!(
            "classifier expects {} channels, features have {channels}",
            classifier.weights.dim().1
        )));
    }
    let classes = classifier.weights.dim().0;
    let mut scores = Array2::zeros((n, classes));
    for i in 0..n {
        for k in 0..classes {
            let mut acc = classifier.bias[k];
            for j in 0..channels {
                acc += classifier.weights[(k, j)] * (grid_features[(i, j)] + mlp_features[(i, j)]);
            }
            scores[(i, k)] = acc;
        }
    }
    Ok(scores)
}
