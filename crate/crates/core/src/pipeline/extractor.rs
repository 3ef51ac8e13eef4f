//! Toy feature extractor: one affine map C_in -> C shared across pixels
//! (a 1x1 convolution). It stands in for a real backbone; everything the
//! pipeline needs from it is a trainable, differentiable map whose output
//! magnitudes separate foreground from background.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// Extractor weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorParams {
    /// C x C_in.
    pub weight: Tensor,
    /// Length C.
    pub bias: Vec<f64>,
}

/// Gradients mirroring [`ExtractorParams`].
#[derive(Debug, Clone)]
pub struct ExtractorGrads {
    pub weight: Tensor,
    pub bias: Vec<f64>,
}

impl ExtractorParams {
    pub fn out_channels(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dims()[1]
    }

    /// Per-pixel affine map over the input grid.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let dims = input.dims();
        if dims.len() != 3 || dims[0] != self.in_channels() {
            return Err(Error::ShapeMismatch {
                context: "extractor input",
                expected: vec![self.in_channels()],
                actual: dims.to_vec(),
            });
        }
        let (c_in, h, w) = (dims[0], dims[1], dims[2]);
        let c_out = self.out_channels();
        let hw = h * w;
        let mut out = Tensor::zeros(&[c_out, h, w]);
        for co in 0..c_out {
            let row = self.weight.row(co);
            let plane = &mut out.data_mut()[co * hw..(co + 1) * hw];
            for p in plane.iter_mut() {
                *p = self.bias[co];
            }
            for (ci, &wv) in row.iter().enumerate().take(c_in) {
                let in_plane = input.plane(ci);
                for (p, &x) in plane.iter_mut().zip(in_plane) {
                    *p += wv * x;
                }
            }
        }
        Ok(out)
    }

    /// Backward pass: gradients for weight, bias, and (discarded here) the
    /// input, given the upstream gradient on the feature map.
    pub fn backward(&self, input: &Tensor, grad_out: &Tensor) -> Result<ExtractorGrads> {
        let dims = input.dims();
        let (c_in, h, w) = (dims[0], dims[1], dims[2]);
        grad_out.expect_dims(&[self.out_channels(), h, w], "extractor upstream gradient")?;
        let mut grad_weight = Tensor::zeros(&[self.out_channels(), c_in]);
        let mut grad_bias = vec![0.0; self.out_channels()];
        for co in 0..self.out_channels() {
            let g_plane = grad_out.plane(co);
            grad_bias[co] = g_plane.iter().sum();
            for ci in 0..c_in {
                let in_plane = input.plane(ci);
                let acc: f64 = g_plane.iter().zip(in_plane).map(|(g, x)| g * x).sum();
                grad_weight.data_mut()[co * c_in + ci] = acc;
            }
        }
        Ok(ExtractorGrads {
            weight: grad_weight,
            bias: grad_bias,
        })
    }
}
