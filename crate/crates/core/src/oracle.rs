//! Independent brute-force reference evaluators.
//!
//! Everything here recomputes results along a different route than the
//! main kernels (dense padding instead of sparse lookups, inverse index
//! maps, prefix-set evaluation of set functions) so the two paths can
//! check each other. Used by the test suites and by the `block-check`
//! command; not meant to be fast.

use ndarray::{Array2, Array3};

use crate::blocks::{FusionParams, Tensor};
use crate::scalar::{real, Real};
use crate::siem::{SgbParams, VoxelGrid};

/// Block mean by the inverse route: every input pixel is scattered into
/// the output cell that owns it, then cells divide by the block size.
pub fn block_mean_naive<S: Real>(input: &Tensor<S>, kh: usize, kw: usize) -> Tensor<S> {
    let (c, h, w) = input.dim();
    assert!(kh > 0 && kw > 0 && h % kh == 0 && w % kw == 0);
    let mut out: Tensor<S> = Tensor::zeros((c, h / kh, w / kw));
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                out[(ch, y / kh, x / kw)] += input[(ch, y, x)];
            }
        }
    }
    out.mapv(|v| v / real((kh * kw) as f64))
}

/// Pixel shuffle via the inverse index map: every output cell pulls its
/// source channel/coordinate instead of the forward scatter.
pub fn pixel_shuffle_naive<S: Real>(input: &Tensor<S>, rh: usize, rw: usize) -> Tensor<S> {
    let (c, h, w) = input.dim();
    let ratio = rh * rw;
    assert!(ratio > 0 && c % ratio == 0);
    Array3::from_shape_fn((c / ratio, h * rh, w * rw), |(ch, y, x)| {
        input[(ch * ratio + (y % rh) * rw + (x % rw), y / rh, x / rw)]
    })
}

/// Literal step-by-step composition of the fusion equations, all in f64.
pub fn mga_reference<S: Real>(
    f_semantic: &Tensor<S>,
    f_motion: &Tensor<S>,
    params: &FusionParams<S>,
) -> Tensor<S> {
    let (c, h, w) = f_semantic.dim();
    let f = |v: S| v.to_f64().unwrap();

    // gate = sigmoid(Conv1x1(semantic)), gated = gate ⊙ motion
    let mut gated = vec![vec![vec![0.0f64; w]; h]; c];
    for co in 0..c {
        for y in 0..h {
            for x in 0..w {
                let mut pre = f(params.gate_bias[co]);
                for ci in 0..c {
                    pre += f(params.gate_weights[(co, ci)]) * f(f_semantic[(ci, y, x)]);
                }
                let sig = 1.0 / (1.0 + (-pre).exp());
                gated[co][y][x] = sig * f(f_motion[(co, y, x)]);
            }
        }
    }

    // pooled = adaptive average pool to 1×1
    let mut pooled = vec![0.0f64; c];
    for (ch, item) in pooled.iter_mut().enumerate() {
        let mut acc = 0.0;
        for row in &gated[ch] {
            for v in row {
                acc += v;
            }
        }
        *item = acc / (h * w) as f64;
    }

    // weights = softmax(Conv1x1(pooled)) × C
    let mut logits = vec![0.0f64; c];
    for i in 0..c {
        let mut acc = f(params.attn_bias[i]);
        for j in 0..c {
            acc += f(params.attn_weights[(i, j)]) * pooled[j];
        }
        logits[i] = acc;
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let weights: Vec<f64> = exps.iter().map(|e| e / sum * c as f64).collect();

    // output = weights ⊙ gated + motion
    Array3::from_shape_fn((c, h, w), |(ch, y, x)| {
        real(weights[ch] * gated[ch][y][x] + f(f_motion[(ch, y, x)]))
    })
}

/// Spatial-guided block on a dense zero-padded cube: materializes the
/// full lattice, convolves every occupied cell against dense neighbors,
/// concatenates, fuses and adds the skip. Returns the feature rows in
/// the grid's slot order.
pub fn sgb_reference<S: Real>(grid: &VoxelGrid<S>, params: &SgbParams<S>) -> Array2<S> {
    let [dx, dy, dz] = grid.dims();
    let channels = grid.channels();
    let branch_out = params.branches[0].taps[0].dim().0;
    let f = |v: S| v.to_f64().unwrap();

    // Dense cube with zeros in empty voxels.
    let mut dense = vec![0.0f64; dx * dy * dz * channels];
    let at = |c: [usize; 3], ch: usize| ((c[0] * dy + c[1]) * dz + c[2]) * channels + ch;
    for (slot, coord) in grid.coords().iter().enumerate() {
        for ch in 0..channels {
            dense[at(*coord, ch)] = f(grid.features()[(slot, ch)]);
        }
    }

    let fetch = |cx: isize, cy: isize, cz: isize, ch: usize| -> f64 {
        if cx < 0 || cy < 0 || cz < 0 || cx >= dx as isize || cy >= dy as isize || cz >= dz as isize
        {
            0.0
        } else {
            dense[at([cx as usize, cy as usize, cz as usize], ch)]
        }
    };

    let mut out = Array2::zeros((grid.occupied(), channels));
    for (slot, coord) in grid.coords().iter().enumerate() {
        let (cx, cy, cz) = (coord[0] as isize, coord[1] as isize, coord[2] as isize);
        let mut concat = vec![0.0f64; 3 * branch_out];
        for (axis, branch) in params.branches.iter().enumerate() {
            for o in 0..branch_out {
                let mut acc = f(branch.bias[o]);
                for (tap, weights) in branch.taps.iter().enumerate() {
                    let d = tap as isize - 1;
                    let (nx, ny, nz) = match axis {
                        0 => (cx + d, cy, cz),
                        1 => (cx, cy + d, cz),
                        _ => (cx, cy, cz + d),
                    };
                    for i in 0..channels {
                        acc += f(weights[(o, i)]) * fetch(nx, ny, nz, i);
                    }
                }
                concat[axis * branch_out + o] = acc;
            }
        }
        for c in 0..channels {
            let mut fused = f(params.fuse_bias[c]);
            for (j, v) in concat.iter().enumerate() {
                fused += f(params.fuse_weights[(c, j)]) * v;
            }
            out[(slot, c)] = real(f(grid.features()[(slot, c)]) + fused);
        }
    }
    out
}

/// Jaccard loss of misprediction set `m` against ground-truth set `gt`:
/// 1 − |G \ M| / |G ∪ M| (0 for the empty misprediction set).
fn jaccard_loss(m: &[bool], gt: &[bool]) -> f64 {
    let kept = m
        .iter()
        .zip(gt)
        .filter(|(mi, gi)| **gi && !**mi)
        .count();
    let union = m.iter().zip(gt).filter(|(mi, gi)| **mi || **gi).count();
    if union == 0 {
        0.0
    } else {
        1.0 - kept as f64 / union as f64
    }
}

/// Lovász extension of the Jaccard loss, evaluated exhaustively over the
/// sorted-error prefix sets: with errors sorted descending, the value is
/// Σ_i Δ(prefix_i) · (e_i − e_{i+1}), each Δ recomputed from scratch.
pub fn lovasz_extension_reference(errors: &[f64], ground_truth: &[bool]) -> f64 {
    let n = errors.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| errors[*b].partial_cmp(&errors[*a]).unwrap());
    let mut total = 0.0;
    let mut member = vec![false; n];
    for (rank, idx) in order.iter().enumerate() {
        member[*idx] = true;
        let next = if rank + 1 < n {
            errors[order[rank + 1]]
        } else {
            0.0
        };
        total += jaccard_loss(&member, ground_truth) * (errors[*idx] - next);
    }
    total
}

/// Reference of the full loss: per present class, misprediction errors
/// against the softmax probabilities, pushed through
/// [`lovasz_extension_reference`], averaged over present classes.
pub fn lovasz_softmax_reference(
    probabilities: &Array2<f64>,
    labels: &[Option<usize>],
) -> f64 {
    let kept: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|_| i))
        .collect();
    if kept.is_empty() {
        return 0.0;
    }
    let mut present: Vec<usize> = kept.iter().map(|i| labels[*i].unwrap()).collect();
    present.sort_unstable();
    present.dedup();

    let mut total = 0.0;
    for &class in &present {
        let errors: Vec<f64> = kept
            .iter()
            .map(|&i| {
                let p = probabilities[(i, class)];
                if labels[i] == Some(class) {
                    1.0 - p
                } else {
                    p
                }
            })
            .collect();
        let gt: Vec<bool> = kept.iter().map(|&i| labels[i] == Some(class)).collect();
        total += lovasz_extension_reference(&errors, &gt);
    }
    total / present.len() as f64
}

/// Confusion-matrix IoU recomputed cell by cell.
pub fn iou_naive(counts: &Array2<u64>, class: usize) -> Option<f64> {
    let k = counts.dim().0;
    let tp = counts[(class, class)];
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for other in 0..k {
        if other != class {
            fp += counts[(other, class)];
            fn_ += counts[(class, other)];
        }
    }
    let denom = tp + fp + fn_;
    (denom > 0).then(|| tp as f64 / denom as f64)
}
