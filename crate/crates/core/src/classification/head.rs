//! Linear-plus-softmax classifier heads, one per feature space.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;
use crate::numerics::vec_ops::softmax;

/// Weights of one classifier head over the current clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHeadParams {
    /// N_C x D.
    pub weight: Tensor,
    /// Length N_C.
    pub bias: Vec<f64>,
}

/// Gradients mirroring [`LinearHeadParams`] plus the input feature.
#[derive(Debug, Clone)]
pub struct HeadGrads {
    pub weight: Tensor,
    pub bias: Vec<f64>,
    pub feature: Vec<f64>,
}

impl LinearHeadParams {
    pub fn zeros(num_classes: usize, dim: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[num_classes, dim]),
            bias: vec![0.0; num_classes],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.weight.dims()[0]
    }

    pub fn dim(&self) -> usize {
        self.weight.dims()[1]
    }
}

/// Class logits before the softmax.
pub fn head_logits(params: &LinearHeadParams, feature: &[f64]) -> Result<Vec<f64>> {
    if feature.len() != params.dim() {
        return Err(Error::ShapeMismatch {
            context: "head feature",
            expected: vec![params.dim()],
            actual: vec![feature.len()],
        });
    }
    let mut logits = params.bias.clone();
    for (class, logit) in logits.iter_mut().enumerate() {
        *logit += crate::numerics::vec_ops::dot(params.weight.row(class), feature);
    }
    Ok(logits)
}

/// Forward pass: `softmax(W f + b)`.
pub fn head_forward(params: &LinearHeadParams, feature: &[f64]) -> Result<Vec<f64>> {
    Ok(softmax(&head_logits(params, feature)?))
}

/// Full backward pass of [`head_forward`] given the upstream gradient with
/// respect to the class distribution.
pub fn head_backward(
    params: &LinearHeadParams,
    feature: &[f64],
    grad_distribution: &[f64],
) -> Result<HeadGrads> {
    let q = head_forward(params, feature)?;
    if grad_distribution.len() != q.len() {
        return Err(Error::ShapeMismatch {
            context: "head upstream gradient",
            expected: vec![q.len()],
            actual: vec![grad_distribution.len()],
        });
    }
    // Softmax backward: dz_k = q_k * (g_k - g . q).
    let g_dot_q = crate::numerics::vec_ops::dot(grad_distribution, &q);
    let grad_logits: Vec<f64> = q
        .iter()
        .zip(grad_distribution)
        .map(|(qk, gk)| qk * (gk - g_dot_q))
        .collect();
    head_backward_from_logits(params, feature, &grad_logits)
}

/// Linear-layer backward pass given the gradient with respect to the
/// logits; the softmax stage is assumed fused into the upstream loss.
pub fn head_backward_from_logits(
    params: &LinearHeadParams,
    feature: &[f64],
    grad_logits: &[f64],
) -> Result<HeadGrads> {
    let (classes, dim) = (params.num_classes(), params.dim());
    if grad_logits.len() != classes || feature.len() != dim {
        return Err(Error::ShapeMismatch {
            context: "head logits backward",
            expected: vec![classes, dim],
            actual: vec![grad_logits.len(), feature.len()],
        });
    }
    let mut grad_weight = Tensor::zeros(&[classes, dim]);
    let mut grad_feature = vec![0.0; dim];
    for (class, &gz) in grad_logits.iter().enumerate() {
        let row = params.weight.row(class);
        for d in 0..dim {
            grad_weight.data_mut()[class * dim + d] = gz * feature[d];
            grad_feature[d] += gz * row[d];
        }
    }
    Ok(HeadGrads {
        weight: grad_weight,
        bias: grad_logits.to_vec(),
        feature: grad_feature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{fd_check, rng, unif};

    fn random_head(classes: usize, dim: usize, seed: u64) -> LinearHeadParams {
        let mut r = rng(seed);
        LinearHeadParams {
            weight: Tensor::from_vec(
                &[classes, dim],
                (0..classes * dim).map(|_| unif(&mut r)).collect(),
            )
            .unwrap(),
            bias: (0..classes).map(|_| unif(&mut r)).collect(),
        }
    }

    #[test]
    fn zero_params_give_uniform_distribution() {
        let params = LinearHeadParams::zeros(5, 3);
        let q = head_forward(&params, &[0.4, -0.2, 0.9]).unwrap();
        for v in q {
            assert!((v - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn dominant_logit_saturates() {
        let mut params = LinearHeadParams::zeros(3, 2);
        params.bias = vec![25.0, 0.0, 0.0];
        let q = head_forward(&params, &[0.0, 0.0]).unwrap();
        assert!(q[0] > 0.999_999);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let params = LinearHeadParams::zeros(3, 2);
        assert!(head_forward(&params, &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        for seed in 0..3 {
            let params = random_head(4, 3, 100 + seed);
            let mut r = rng(200 + seed);
            let feature: Vec<f64> = (0..3).map(|_| unif(&mut r)).collect();
            let upstream: Vec<f64> = (0..4).map(|_| unif(&mut r)).collect();
            let grads = head_backward(&params, &feature, &upstream).unwrap();

            let packed: Vec<f64> = params
                .weight
                .data()
                .iter()
                .chain(&params.bias)
                .chain(&feature)
                .cloned()
                .collect();
            let analytic: Vec<f64> = grads
                .weight
                .data()
                .iter()
                .chain(&grads.bias)
                .chain(&grads.feature)
                .cloned()
                .collect();
            let upstream2 = upstream.clone();
            fd_check(
                &packed,
                &analytic,
                move |x| {
                    let p = LinearHeadParams {
                        weight: Tensor::from_vec(&[4, 3], x[..12].to_vec()).unwrap(),
                        bias: x[12..16].to_vec(),
                    };
                    let q = head_forward(&p, &x[16..19]).unwrap();
                    q.iter().zip(&upstream2).map(|(a, b)| a * b).sum()
                },
                1e-5,
                1e-5,
            );
        }
    }
}
