//! The training loss stack: weighted cross-entropy plus Lovász-Softmax
//! per branch, summed across the semantic (mobility) and motion
//! branches.
//!
//! Both losses take per-sample class probability rows (each summing to
//! 1) and per-sample labels, with `None` marking ignored samples.
//! Class indices follow the label enums: 0 = static/unmovable,
//! 1 = moving/movable.

use ndarray::ArrayView2;
use thiserror::Error;

use crate::scalar::{real, Real};

/// Probabilities are floored here before the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("row {row} sums to {sum}, not a distribution")]
    NotNormalized { row: usize, sum: f64 },
    #[error("row {row} contains a negative probability")]
    NegativeProbability { row: usize },
    #[error("class weight {class} is negative")]
    NegativeWeight { class: usize },
    #[error("{what}: expected {want}, got {got}")]
    LengthMismatch {
        what: &'static str,
        want: usize,
        got: usize,
    },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
}

fn validate<S: Real>(
    probabilities: &ArrayView2<S>,
    labels: &[Option<usize>],
) -> Result<(), LossError> {
    let (n, k) = probabilities.dim();
    if labels.len() != n {
        return Err(LossError::LengthMismatch {
            what: "labels",
            want: n,
            got: labels.len(),
        });
    }
    for (row, r) in probabilities.outer_iter().enumerate() {
        let mut sum = 0.0f64;
        for v in r.iter() {
            let v = v.to_f64().unwrap();
            if v < -1e-9 {
                return Err(LossError::NegativeProbability { row });
            }
            sum += v;
        }
        if (sum - 1.0).abs() > 1e-6 {
            return Err(LossError::NotNormalized { row, sum });
        }
    }
    for l in labels.iter().flatten() {
        if *l >= k {
            return Err(LossError::LabelOutOfRange {
                label: *l,
                classes: k,
            });
        }
    }
    Ok(())
}

/// Mean over non-ignored samples of −weight[label]·ln(p(label)), with
/// probabilities clamped into [1e-12, 1]. Zero when every sample is
/// ignored.
pub fn weighted_ce<S: Real>(
    probabilities: ArrayView2<S>,
    labels: &[Option<usize>],
    weights: &[S],
) -> Result<S, LossError> {
    validate(&probabilities, labels)?;
    let k = probabilities.dim().1;
    if weights.len() != k {
        return Err(LossError::LengthMismatch {
            what: "weights",
            want: k,
            got: weights.len(),
        });
    }
    for (class, w) in weights.iter().enumerate() {
        if *w < S::zero() {
            return Err(LossError::NegativeWeight { class });
        }
    }
    let mut total = S::zero();
    let mut count = 0usize;
    for (i, label) in labels.iter().enumerate() {
        let Some(y) = label else { continue };
        let p = probabilities[(i, *y)]
            .max(real(PROB_FLOOR))
            .min(S::one());
        total += -weights[*y] * p.ln();
        count += 1;
    }
    if count == 0 {
        return Ok(S::zero());
    }
    Ok(total / real(count as f64))
}

/// Lovász-Softmax: for every class present among the labels, the
/// misprediction errors (1 − p for the true class, p otherwise) are
/// sorted descending and folded against the discrete gradient of the
/// Jaccard loss along that order; the result is averaged over present
/// classes. Computed over the whole sample set passed in.
pub fn lovasz_softmax<S: Real>(
    probabilities: ArrayView2<S>,
    labels: &[Option<usize>],
) -> Result<S, LossError> {
    validate(&probabilities, labels)?;
    let kept: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|_| i))
        .collect();
    if kept.is_empty() {
        return Ok(S::zero());
    }
    let mut present: Vec<usize> = kept.iter().map(|&i| labels[i].unwrap()).collect();
    present.sort_unstable();
    present.dedup();

    let mut total = S::zero();
    for &class in &present {
        let mut errors: Vec<(S, bool)> = kept
            .iter()
            .map(|&i| {
                let p = probabilities[(i, class)];
                let is_true = labels[i] == Some(class);
                let e = if is_true { S::one() - p } else { p };
                (e, is_true)
            })
            .collect();
        errors.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

        let gts = real::<S>(errors.iter().filter(|(_, t)| *t).count() as f64);
        let mut cum_fg = S::zero();
        let mut cum_bg = S::zero();
        let mut prev_jaccard = S::zero();
        let mut class_loss = S::zero();
        for (e, is_true) in &errors {
            if *is_true {
                cum_fg += S::one();
            } else {
                cum_bg += S::one();
            }
            let intersection = gts - cum_fg;
            let union = gts + cum_bg;
            let jaccard = S::one() - intersection / union;
            class_loss += *e * (jaccard - prev_jaccard);
            prev_jaccard = jaccard;
        }
        total += class_loss;
    }
    Ok(total / real(present.len() as f64))
}

/// One branch's inputs: probabilities, labels, cross-entropy weights.
#[derive(Debug, Clone, Copy)]
pub struct BranchInputs<'a, S> {
    pub probabilities: ArrayView2<'a, S>,
    pub labels: &'a [Option<usize>],
    pub weights: &'a [S],
}

/// Per-branch losses; total = wce + lovasz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchLoss<S> {
    pub wce: S,
    pub lovasz: S,
    pub total: S,
}

/// Both branches plus their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport<S> {
    pub semantic: BranchLoss<S>,
    pub motion: BranchLoss<S>,
    pub grand_total: S,
}

pub fn branch_loss<S: Real>(inputs: BranchInputs<'_, S>) -> Result<BranchLoss<S>, LossError> {
    let wce = weighted_ce(inputs.probabilities, inputs.labels, inputs.weights)?;
    let lovasz = lovasz_softmax(inputs.probabilities, inputs.labels)?;
    Ok(BranchLoss {
        wce,
        lovasz,
        total: wce + lovasz,
    })
}

/// The summed dual-branch loss: semantic branch scored on mobility
/// labels, motion branch on motion labels.
pub fn total_loss<S: Real>(
    semantic: BranchInputs<'_, S>,
    motion: BranchInputs<'_, S>,
) -> Result<LossReport<S>, LossError> {
    let semantic = branch_loss(semantic)?;
    let motion = branch_loss(motion)?;
    Ok(LossReport {
        semantic,
        motion,
        grand_total: semantic.total + motion.total,
    })
}

/// Cross-entropy class weights from a label histogram: weight 1/√fᵢ for
/// frequency fᵢ = countᵢ / total. Absent classes get weight 0 (they
/// never contribute). The scheme is a default; any non-negative weights
/// may be supplied instead.
pub fn inverse_sqrt_freq_weights(histogram: &[u64]) -> Vec<f64> {
    let total: u64 = histogram.iter().sum();
    histogram
        .iter()
        .map(|&c| {
            if c == 0 || total == 0 {
                0.0
            } else {
                (total as f64 / c as f64).sqrt()
            }
        })
        .collect()
}
