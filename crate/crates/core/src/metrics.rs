//! Segmentation evaluation: confusion-matrix accumulation and per-class
//! intersection-over-union, with the moving class as the headline
//! number.

use ndarray::Array2;
use thiserror::Error;

use crate::dataset::{MotionLabel, TaskLabels};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{what}: expected {want}, got {got}")]
    LengthMismatch {
        what: &'static str,
        want: usize,
        got: usize,
    },
    #[error("class {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },
}

/// K×K counts, rows = ground truth, columns = prediction. Ignored
/// samples are never recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Array2<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            counts: Array2::zeros((classes, classes)),
        }
    }

    pub fn classes(&self) -> usize {
        self.counts.dim().0
    }

    pub fn counts(&self) -> &Array2<u64> {
        &self.counts
    }

    pub fn record(&mut self, truth: usize, prediction: usize) -> Result<(), MetricsError> {
        let k = self.classes();
        for class in [truth, prediction] {
            if class >= k {
                return Err(MetricsError::ClassOutOfRange { class, classes: k });
            }
        }
        self.counts[(truth, prediction)] += 1;
        Ok(())
    }

    /// Elementwise sum; associative and commutative, so per-frame
    /// matrices can be accumulated in any grouping.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.classes(), other.classes());
        self.counts += &other.counts;
    }

    pub fn total(&self) -> u64 {
        self.counts.sum()
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.counts[(class, class)]
    }

    pub fn false_positives(&self, class: usize) -> u64 {
        (0..self.classes())
            .filter(|&t| t != class)
            .map(|t| self.counts[(t, class)])
            .sum()
    }

    pub fn false_negatives(&self, class: usize) -> u64 {
        (0..self.classes())
            .filter(|&p| p != class)
            .map(|p| self.counts[(class, p)])
            .sum()
    }
}

/// Per-class IoU = TP / (TP + FP + FN). A class absent from both truth
/// and prediction has an empty denominator and reports `None`; absent
/// classes are excluded from any mean.
pub fn iou(cm: &ConfusionMatrix) -> Vec<Option<f64>> {
    (0..cm.classes())
        .map(|c| {
            let denom = cm.true_positives(c) + cm.false_positives(c) + cm.false_negatives(c);
            (denom > 0).then(|| cm.true_positives(c) as f64 / denom as f64)
        })
        .collect()
}

/// Motion-task classes: 0 = static, 1 = moving.
pub const MOTION_CLASSES: usize = 2;
pub const STATIC_CLASS: usize = 0;
pub const MOVING_CLASS: usize = 1;

/// Sequence-level evaluation summary for the motion task.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub iou_static: Option<f64>,
    pub iou_moving: Option<f64>,
    pub frames: usize,
    pub evaluated_points: u64,
    pub ignored_points: u64,
}

impl EvalReport {
    /// Human-readable lines.
    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.6}"),
            None => "absent".to_string(),
        };
        let cm = &self.confusion;
        let mut out = String::new();
        out.push_str(&format!(
            "frames evaluated      {}\npoints evaluated      {}\npoints ignored        {}\n",
            self.frames, self.evaluated_points, self.ignored_points
        ));
        out.push_str(&format!(
            "confusion (truth x prediction)\n  static: static {:>10}  moving {:>10}\n  moving: static {:>10}  moving {:>10}\n",
            cm.counts()[(0, 0)],
            cm.counts()[(0, 1)],
            cm.counts()[(1, 0)],
            cm.counts()[(1, 1)]
        ));
        out.push_str(&format!(
            "IoU static            {}\nIoU moving            {}\n",
            fmt(self.iou_static),
            fmt(self.iou_moving)
        ));
        out
    }

    /// Machine-readable `key = value` lines; keys are fixed and floats
    /// printed with six decimals.
    pub fn to_kv(&self) -> String {
        let fmt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.6}"),
            None => "absent".to_string(),
        };
        let cm = &self.confusion;
        [
            format!("frames = {}", self.frames),
            format!("points.evaluated = {}", self.evaluated_points),
            format!("points.ignored = {}", self.ignored_points),
            format!("confusion.static.static = {}", cm.counts()[(0, 0)]),
            format!("confusion.static.moving = {}", cm.counts()[(0, 1)]),
            format!("confusion.moving.static = {}", cm.counts()[(1, 0)]),
            format!("confusion.moving.moving = {}", cm.counts()[(1, 1)]),
            format!("iou.static = {}", fmt(self.iou_static)),
            format!("iou.moving = {}", fmt(self.iou_moving)),
        ]
        .join("\n")
            + "\n"
    }
}

/// Accumulates one confusion matrix over per-frame motion predictions
/// against ground truth, skipping ignore-labeled points. A predicted
/// ignore on a scored point counts as static.
pub fn evaluate_sequence(
    predictions: &[Vec<MotionLabel>],
    truth: &[TaskLabels],
) -> Result<EvalReport, MetricsError> {
    if predictions.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            what: "frames",
            want: truth.len(),
            got: predictions.len(),
        });
    }
    let mut confusion = ConfusionMatrix::new(MOTION_CLASSES);
    let mut ignored = 0u64;
    for (frame, (pred, gt)) in predictions.iter().zip(truth).enumerate() {
        if pred.len() != gt.len() {
            let _ = frame;
            return Err(MetricsError::LengthMismatch {
                what: "points",
                want: gt.len(),
                got: pred.len(),
            });
        }
        for (p, t) in pred.iter().zip(&gt.motion) {
            let t = match t {
                MotionLabel::Ignore => {
                    ignored += 1;
                    continue;
                }
                MotionLabel::Static => STATIC_CLASS,
                MotionLabel::Moving => MOVING_CLASS,
            };
            let p = match p {
                MotionLabel::Moving => MOVING_CLASS,
                _ => STATIC_CLASS,
            };
            confusion.record(t, p)?;
        }
    }
    let ious = iou(&confusion);
    Ok(EvalReport {
        iou_static: ious[STATIC_CLASS],
        iou_moving: ious[MOVING_CLASS],
        frames: truth.len(),
        evaluated_points: confusion.total(),
        ignored_points: ignored,
        confusion,
    })
}
