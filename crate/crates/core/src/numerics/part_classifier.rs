//! The part-classifier head: a 3x3 convolution with zero padding 1
//! followed by a per-pixel channel softmax. `l` output channels cover
//! the foreground parts plus one background channel.

use crate::error::{Error, Result};
use crate::numerics::tensor::{SoftMask, Tensor};
use crate::numerics::vec_ops::softmax;

/// Weights of the part classifier head.
#[derive(Debug, Clone, PartialEq)]
pub struct PartClassifierParams {
    /// l x C x 3 x 3 convolution kernel.
    pub kernel: Tensor,
    /// Per-output-channel bias, length l.
    pub bias: Vec<f64>,
}

/// Gradients mirroring [`PartClassifierParams`].
#[derive(Debug, Clone)]
pub struct PartClassifierGrads {
    pub kernel: Tensor,
    pub bias: Vec<f64>,
}

impl PartClassifierParams {
    pub fn new(kernel: Tensor, bias: Vec<f64>) -> Result<Self> {
        let dims = kernel.dims();
        if dims.len() != 4 || dims[2] != 3 || dims[3] != 3 {
            return Err(Error::ShapeMismatch {
                context: "part classifier kernel",
                expected: vec![0, 0, 3, 3],
                actual: dims.to_vec(),
            });
        }
        if dims[0] < 2 {
            return Err(Error::InvalidParameter {
                name: "parts",
                message: format!("need at least 2 part channels, got {}", dims[0]),
            });
        }
        if bias.len() != dims[0] {
            return Err(Error::ShapeMismatch {
                context: "part classifier bias",
                expected: vec![dims[0]],
                actual: vec![bias.len()],
            });
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("part classifier bias"));
        }
        Ok(Self { kernel, bias })
    }

    pub fn num_parts(&self) -> usize {
        self.kernel.dims()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.dims()[1]
    }
}

#[inline]
fn kernel_offset(c_in: usize, parts: usize, k: usize, c: usize, i: usize, j: usize) -> usize {
    debug_assert!(k < parts);
    let _ = parts;
    ((k * c_in + c) * 3 + i) * 3 + j
}

/// Pre-softmax logits of the head: 3x3 conv, zero padding 1, plus bias.
fn conv_logits(params: &PartClassifierParams, feature_map: &Tensor) -> Result<Tensor> {
    let fdims = feature_map.dims();
    if fdims.len() != 3 {
        return Err(Error::ShapeMismatch {
            context: "part classifier input rank",
            expected: vec![3],
            actual: vec![fdims.len()],
        });
    }
    let (c_in, h, w) = (fdims[0], fdims[1], fdims[2]);
    if params.in_channels() != c_in {
        return Err(Error::ShapeMismatch {
            context: "part classifier input channels",
            expected: vec![params.in_channels()],
            actual: vec![c_in],
        });
    }
    let parts = params.num_parts();
    let kernel = params.kernel.data();
    let mut logits = Tensor::zeros(&[parts, h, w]);
    for k in 0..parts {
        for y in 0..h {
            for x in 0..w {
                let mut acc = params.bias[k];
                for c in 0..c_in {
                    let plane = feature_map.plane(c);
                    for di in 0..3usize {
                        let yy = y as isize + di as isize - 1;
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        for dj in 0..3usize {
                            let xx = x as isize + dj as isize - 1;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            acc += kernel[kernel_offset(c_in, parts, k, c, di, dj)]
                                * plane[yy as usize * w + xx as usize];
                        }
                    }
                }
                logits.set3(k, y, x, acc);
            }
        }
    }
    Ok(logits)
}

/// Forward pass: per-pixel channel softmax over the conv logits.
pub fn part_classifier_forward(
    params: &PartClassifierParams,
    feature_map: &Tensor,
) -> Result<SoftMask> {
    let logits = conv_logits(params, feature_map)?;
    let dims = logits.dims().to_vec();
    let (parts, h, w) = (dims[0], dims[1], dims[2]);
    let mut mask = Tensor::zeros(&dims);
    let mut column = vec![0.0; parts];
    for y in 0..h {
        for x in 0..w {
            for (k, slot) in column.iter_mut().enumerate() {
                *slot = logits.get3(k, y, x);
            }
            let probs = softmax(&column);
            for (k, p) in probs.into_iter().enumerate() {
                mask.set3(k, y, x, p);
            }
        }
    }
    Ok(mask)
}

/// Backward pass of [`part_classifier_forward`].
///
/// `grad_mask` is the upstream gradient with respect to the softmax output;
/// the returned gradients cover kernel, bias, and the input feature map.
pub fn part_classifier_backward(
    params: &PartClassifierParams,
    feature_map: &Tensor,
    grad_mask: &Tensor,
) -> Result<(PartClassifierGrads, Tensor)> {
    let mask = part_classifier_forward(params, feature_map)?;
    grad_mask.expect_dims(mask.dims(), "part classifier upstream gradient")?;
    part_classifier_backward_cached(params, feature_map, &mask, grad_mask)
}

/// Backward pass reusing an already computed forward output.
pub fn part_classifier_backward_cached(
    params: &PartClassifierParams,
    feature_map: &Tensor,
    mask: &SoftMask,
    grad_mask: &Tensor,
) -> Result<(PartClassifierGrads, Tensor)> {
    let fdims = feature_map.dims();
    let (c_in, h, w) = (fdims[0], fdims[1], fdims[2]);
    let parts = params.num_parts();

    // Softmax backward per pixel: dz_k = p_k * (g_k - sum_j g_j p_j).
    let mut grad_logits = Tensor::zeros(&[parts, h, w]);
    for y in 0..h {
        for x in 0..w {
            let mut g_dot_p = 0.0;
            for k in 0..parts {
                g_dot_p += grad_mask.get3(k, y, x) * mask.get3(k, y, x);
            }
            for k in 0..parts {
                let p = mask.get3(k, y, x);
                grad_logits.set3(k, y, x, p * (grad_mask.get3(k, y, x) - g_dot_p));
            }
        }
    }

    // Convolution backward.
    let mut grad_kernel = Tensor::zeros(&[parts, c_in, 3, 3]);
    let mut grad_bias = vec![0.0; parts];
    let mut grad_input = Tensor::zeros(&[c_in, h, w]);
    let kernel = params.kernel.data();
    for k in 0..parts {
        let gz_plane = grad_logits.plane(k).to_vec();
        grad_bias[k] = gz_plane.iter().sum();
        for c in 0..c_in {
            let in_plane = feature_map.plane(c).to_vec();
            for y in 0..h {
                for x in 0..w {
                    let gz = gz_plane[y * w + x];
                    if gz == 0.0 {
                        continue;
                    }
                    for di in 0..3usize {
                        let yy = y as isize + di as isize - 1;
                        if yy < 0 || yy >= h as isize {
                            continue;
                        }
                        for dj in 0..3usize {
                            let xx = x as isize + dj as isize - 1;
                            if xx < 0 || xx >= w as isize {
                                continue;
                            }
                            let koff = kernel_offset(c_in, parts, k, c, di, dj);
                            grad_kernel.data_mut()[koff] +=
                                gz * in_plane[yy as usize * w + xx as usize];
                            grad_input.add3(c, yy as usize, xx as usize, gz * kernel[koff]);
                        }
                    }
                }
            }
        }
    }

    Ok((
        PartClassifierGrads {
            kernel: grad_kernel,
            bias: grad_bias,
        },
        grad_input,
    ))
}
