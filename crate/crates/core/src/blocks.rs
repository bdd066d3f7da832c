//! Forward-only reference kernels of the 2D network blocks.
//!
//! These are exact, parameter-supplied implementations meant for oracle
//! testing and desk-scale verification, not for training: strip average
//! pooling with a rectangular kernel, the matching rectangular pixel
//! shuffle, and the semantic-gated channel-attention fusion. Reductions
//! use a fixed summation order so results are independent of any
//! parallel schedule.

use ndarray::{Array1, Array2, Array3};
use thiserror::Error;

use crate::scalar::{real, Real};

/// Dense (channels, height, width) feature map.
pub type Tensor<S> = Array3<S>;

#[derive(Debug, Error)]
pub enum BlockError {
    #[error("{axis} {size} is not divisible by kernel {kernel}")]
    NotDivisible {
        axis: &'static str,
        size: usize,
        kernel: usize,
    },
    #[error("kernel/ratio must be at least 1")]
    ZeroKernel,
    #[error("channel count {channels} is not divisible by ratio product {ratio}")]
    ChannelNotDivisible { channels: usize, ratio: usize },
    #[error("operands have shapes {a:?} and {b:?}")]
    ShapeMismatch {
        a: (usize, usize, usize),
        b: (usize, usize, usize),
    },
    #[error("parameters expect {want} channels, operand has {got}")]
    ParamMismatch { want: usize, got: usize },
}

/// Strip average pooling: each output cell is the arithmetic mean of its
/// kernel_h × kernel_w input block, per channel. The usual kernel is
/// 2×4 — twice as wide as tall, matching the wide aspect ratio of range
/// images. Output shape (C, H/kernel_h, W/kernel_w).
pub fn sapl<S: Real>(
    input: &Tensor<S>,
    kernel_h: usize,
    kernel_w: usize,
) -> Result<Tensor<S>, BlockError> {
    if kernel_h == 0 || kernel_w == 0 {
        return Err(BlockError::ZeroKernel);
    }
    let (c, h, w) = input.dim();
    if h % kernel_h != 0 {
        return Err(BlockError::NotDivisible {
            axis: "height",
            size: h,
            kernel: kernel_h,
        });
    }
    if w % kernel_w != 0 {
        return Err(BlockError::NotDivisible {
            axis: "width",
            size: w,
            kernel: kernel_w,
        });
    }
    let norm = real::<S>((kernel_h * kernel_w) as f64);
    let mut out = Tensor::zeros((c, h / kernel_h, w / kernel_w));
    for ch in 0..c {
        for oy in 0..h / kernel_h {
            for ox in 0..w / kernel_w {
                let mut acc = S::zero();
                for dy in 0..kernel_h {
                    for dx in 0..kernel_w {
                        acc += input[(ch, oy * kernel_h + dy, ox * kernel_w + dx)];
                    }
                }
                out[(ch, oy, ox)] = acc / norm;
            }
        }
    }
    Ok(out)
}

/// Rectangular sub-pixel rearrangement: channel blocks of size
/// ratio_h·ratio_w become ratio_h × ratio_w spatial neighborhoods,
/// inverting the aspect change of the rectangular pooling.
///
/// output(c, ratio_h·y + i, ratio_w·x + j) = input(c·ratio_h·ratio_w + i·ratio_w + j, y, x)
pub fn pixel_shuffle<S: Real>(
    input: &Tensor<S>,
    ratio_h: usize,
    ratio_w: usize,
) -> Result<Tensor<S>, BlockError> {
    if ratio_h == 0 || ratio_w == 0 {
        return Err(BlockError::ZeroKernel);
    }
    let (c, h, w) = input.dim();
    let ratio = ratio_h * ratio_w;
    if c % ratio != 0 {
        return Err(BlockError::ChannelNotDivisible { channels: c, ratio });
    }
    let mut out = Tensor::zeros((c / ratio, h * ratio_h, w * ratio_w));
    for ch in 0..c / ratio {
        for y in 0..h {
            for x in 0..w {
                for i in 0..ratio_h {
                    for j in 0..ratio_w {
                        out[(ch, ratio_h * y + i, ratio_w * x + j)] =
                            input[(ch * ratio + i * ratio_w + j, y, x)];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Weights of the fusion: the gating 1×1 convolution applied to the
/// semantic features and the channel-attention 1×1 convolution applied
/// to the pooled gated features.
#[derive(Debug, Clone)]
pub struct FusionParams<S> {
    /// C_out×C_in gate weights; C_out must match the motion channels.
    pub gate_weights: Array2<S>,
    pub gate_bias: Array1<S>,
    /// C×C attention weights over the pooled channel vector.
    pub attn_weights: Array2<S>,
    pub attn_bias: Array1<S>,
}

/// Intermediates of [`mga_fuse`], exposed for tests and self-checks.
#[derive(Debug, Clone)]
pub struct MgaStages<S> {
    /// Sigmoid-gated product: sigmoid(conv1x1(semantic)) ⊙ motion.
    pub gated: Tensor<S>,
    /// Global average of the gated map per channel.
    pub pooled: Array1<S>,
    /// softmax(conv1x1(pooled)) · C; sums to C.
    pub channel_weights: Array1<S>,
    /// Channel-weighted gated map.
    pub scaled: Tensor<S>,
    /// scaled + motion (the skip connection).
    pub output: Tensor<S>,
}

/// Fuses semantic features into motion features: a sigmoid gate computed
/// from the semantic map multiplies the motion map, a global-pool +
/// softmax channel attention re-weights the result, and the motion map
/// is added back as a skip.
pub fn mga_fuse<S: Real>(
    f_semantic: &Tensor<S>,
    f_motion: &Tensor<S>,
    params: &FusionParams<S>,
) -> Result<Tensor<S>, BlockError> {
    Ok(mga_fuse_stages(f_semantic, f_motion, params)?.output)
}

pub fn mga_fuse_stages<S: Real>(
    f_semantic: &Tensor<S>,
    f_motion: &Tensor<S>,
    params: &FusionParams<S>,
) -> Result<MgaStages<S>, BlockError> {
    let dim = f_semantic.dim();
    if dim != f_motion.dim() {
        return Err(BlockError::ShapeMismatch {
            a: dim,
            b: f_motion.dim(),
        });
    }
    let (c, h, w) = dim;
    if params.gate_weights.dim() != (c, c)
        || params.gate_bias.len() != c
        || params.attn_weights.dim() != (c, c)
        || params.attn_bias.len() != c
    {
        return Err(BlockError::ParamMismatch {
            want: c,
            got: params.gate_weights.dim().1,
        });
    }

    let gate = conv1x1(f_semantic, &params.gate_weights, &params.gate_bias);
    let mut gated = Tensor::zeros(dim);
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                gated[(ch, y, x)] = sigmoid(gate[(ch, y, x)]) * f_motion[(ch, y, x)];
            }
        }
    }

    let area = real::<S>((h * w) as f64);
    let pooled = Array1::from_shape_fn(c, |ch| {
        let mut acc = S::zero();
        for y in 0..h {
            for x in 0..w {
                acc += gated[(ch, y, x)];
            }
        }
        acc / area
    });

    let mut logits = Array1::zeros(c);
    for i in 0..c {
        let mut acc = params.attn_bias[i];
        for j in 0..c {
            acc += params.attn_weights[(i, j)] * pooled[j];
        }
        logits[i] = acc;
    }
    let channel_weights = softmax(&logits).mapv(|v| v * real::<S>(c as f64));

    let mut scaled = Tensor::zeros(dim);
    let mut output = Tensor::zeros(dim);
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                scaled[(ch, y, x)] = channel_weights[ch] * gated[(ch, y, x)];
                output[(ch, y, x)] = scaled[(ch, y, x)] + f_motion[(ch, y, x)];
            }
        }
    }

    Ok(MgaStages {
        gated,
        pooled,
        channel_weights,
        scaled,
        output,
    })
}

/// Per-pixel linear map over channels.
fn conv1x1<S: Real>(input: &Tensor<S>, weights: &Array2<S>, bias: &Array1<S>) -> Tensor<S> {
    let (c_in, h, w) = input.dim();
    let c_out = weights.dim().0;
    let mut out = Tensor::zeros((c_out, h, w));
    for co in 0..c_out {
        for y in 0..h {
            for x in 0..w {
                let mut acc = bias[co];
                for ci in 0..c_in {
                    acc += weights[(co, ci)] * input[(ci, y, x)];
                }
                out[(co, y, x)] = acc;
            }
        }
    }
    out
}

fn sigmoid<S: Real>(x: S) -> S {
    S::one() / (S::one() + (-x).exp())
}

fn softmax<S: Real>(logits: &Array1<S>) -> Array1<S> {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let exps = logits.mapv(|v| (v - max).exp());
    let sum: S = exps.iter().copied().sum();
    exps.mapv(|v| v / sum)
}
