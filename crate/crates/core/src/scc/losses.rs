//! Losses supervising the part classifier: pixel cross-entropy against the
//! smoothed pseudo masks, plus a pairwise overlap penalty that stops all
//! part channels from collapsing onto the same region.

use crate::error::{Error, Result};
use crate::numerics::tensor::{SoftMask, Tensor};

/// Pixel-averaged cross-entropy of predicted masks against pseudo masks.
///
/// `loss = -(1/(H*W)) * sum_{k,h,w} target[k,h,w] * ln predicted[k,h,w]`,
/// and the gradient with respect to `predicted` is `-target/predicted`
/// scaled by the same per-pixel average.
pub fn parsing_loss(target: &SoftMask, predicted: &SoftMask) -> Result<(f64, Tensor)> {
    predicted.expect_dims(target.dims(), "parsing_loss predicted")?;
    let dims = target.dims();
    if dims.len() != 3 {
        return Err(Error::ShapeMismatch {
            context: "parsing_loss rank",
            expected: vec![3],
            actual: vec![dims.len()],
        });
    }
    let pixels = (dims[1] * dims[2]) as f64;
    if pixels == 0.0 {
        return Err(Error::EmptyInput("parsing_loss masks"));
    }
    let inv = 1.0 / pixels;
    let mut loss = 0.0;
    let mut grad = Tensor::zeros(dims);
    for (i, (&t, &p)) in target.data().iter().zip(predicted.data()).enumerate() {
        if t != 0.0 {
            if p <= 0.0 {
                return Err(Error::NonPositiveProbability("parsing_loss predicted mask"));
            }
            loss -= t * p.ln() * inv;
            grad.data_mut()[i] = -t / p * inv;
        }
    }
    Ok((loss, grad))
}

/// Pairwise overlap penalty over part channels.
///
/// `loss = 2/(l(l-1)) * sum_{i<j} sum_{h,w} P_i[h,w] * P_j[h,w]`; the
/// gradient of channel k is the sum of all other channels times the same
/// combinatorial factor.
pub fn diversity_loss(predicted: &SoftMask) -> Result<(f64, Tensor)> {
    let dims = predicted.dims();
    if dims.len() != 3 {
        return Err(Error::ShapeMismatch {
            context: "diversity_loss rank",
            expected: vec![3],
            actual: vec![dims.len()],
        });
    }
    let parts = dims[0];
    if parts < 2 {
        return Err(Error::InvalidParameter {
            name: "parts",
            message: format!("diversity needs >= 2 channels, got {parts}"),
        });
    }
    let hw = dims[1] * dims[2];
    let factor = 2.0 / (parts as f64 * (parts as f64 - 1.0));

    // channel_sum[h*w] = sum over channels at that pixel, so the pairwise
    // product sum is (channel_sum^2 - sum of squares)/2 per pixel.
    let mut channel_sum = vec![0.0f64; hw];
    let mut square_sum = vec![0.0f64; hw];
    for k in 0..parts {
        let plane = predicted.plane(k);
        for (i, &v) in plane.iter().enumerate() {
            channel_sum[i] += v;
            square_sum[i] += v * v;
        }
    }
    let mut loss = 0.0;
    for i in 0..hw {
        loss += 0.5 * (channel_sum[i] * channel_sum[i] - square_sum[i]);
    }
    loss *= factor;

    let mut grad = Tensor::zeros(dims);
    for k in 0..parts {
        let plane = predicted.plane(k).to_vec();
        for (i, &v) in plane.iter().enumerate() {
            grad.data_mut()[k * hw + i] = factor * (channel_sum[i] - v);
        }
    }
    Ok((loss, grad))
}

/// Combined spatial cascaded clustering loss: parsing plus diversity.
pub fn scc_loss(target: &SoftMask, predicted: &SoftMask) -> Result<(f64, Tensor)> {
    let (parsing, grad_parsing) = parsing_loss(target, predicted)?;
    let (diversity, grad_diversity) = diversity_loss(predicted)?;
    let data = grad_parsing
        .data()
        .iter()
        .zip(grad_diversity.data())
        .map(|(a, b)| a + b)
        .collect();
    Ok((parsing + diversity, Tensor::from_vec(predicted.dims(), data)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{fd_check, rng};
    use rand::Rng;

    fn random_simplex_mask(parts: usize, h: usize, w: usize, seed: u64) -> Tensor {
        let mut r = rng(seed);
        let mut mask = Tensor::zeros(&[parts, h, w]);
        for y in 0..h {
            for x in 0..w {
                let mut col: Vec<f64> = (0..parts).map(|_| r.gen_range(0.05..1.0)).collect();
                let s: f64 = col.iter().sum();
                for v in col.iter_mut() {
                    *v /= s;
                }
                for (k, v) in col.into_iter().enumerate() {
                    mask.set3(k, y, x, v);
                }
            }
        }
        mask
    }

    #[test]
    fn perfect_prediction_has_near_zero_parsing_loss() {
        // Nearly one-hot target and prediction concentrated on channel 0.
        let eps = 1e-9;
        let parts = 3;
        let mut mask = Tensor::zeros(&[parts, 2, 2]);
        for y in 0..2 {
            for x in 0..2 {
                mask.set3(0, y, x, 1.0 - 2.0 * eps);
                mask.set3(1, y, x, eps);
                mask.set3(2, y, x, eps);
            }
        }
        let (loss, _) = parsing_loss(&mask.clone(), &mask).unwrap();
        assert!(loss < 1e-7, "loss {loss}");
    }

    #[test]
    fn uniform_target_and_prediction_give_log_l() {
        let parts = 4;
        let uniform = Tensor::from_vec(&[parts, 3, 2], vec![0.25; parts * 6]).unwrap();
        let (loss, _) = parsing_loss(&uniform.clone(), &uniform).unwrap();
        assert!((loss - (parts as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn parsing_gradient_matches_finite_differences() {
        let target = random_simplex_mask(3, 2, 3, 1);
        let predicted = random_simplex_mask(3, 2, 3, 2);
        let (_, grad) = parsing_loss(&target, &predicted).unwrap();
        fd_check(
            predicted.data(),
            grad.data(),
            |x| {
                let p = Tensor::from_vec(predicted.dims(), x.to_vec()).unwrap();
                parsing_loss(&target, &p).unwrap().0
            },
            1e-5,
            1e-5,
        );
    }

    #[test]
    fn parsing_rejects_nonpositive_prediction() {
        let target = Tensor::from_vec(&[2, 1, 1], vec![1.0, 0.0]).unwrap();
        let bad = Tensor::from_vec(&[2, 1, 1], vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            parsing_loss(&target, &bad).unwrap_err(),
            Error::NonPositiveProbability(_)
        ));
    }

    #[test]
    fn disjoint_one_hot_channels_have_zero_diversity() {
        let mut mask = Tensor::zeros(&[2, 1, 4]);
        mask.set3(0, 0, 0, 1.0);
        mask.set3(0, 0, 1, 1.0);
        mask.set3(1, 0, 2, 1.0);
        mask.set3(1, 0, 3, 1.0);
        let (loss, _) = diversity_loss(&mask).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn identical_uniform_channels_hit_closed_form() {
        let parts = 4;
        let (h, w) = (5, 3);
        let uniform =
            Tensor::from_vec(&[parts, h, w], vec![1.0 / parts as f64; parts * h * w]).unwrap();
        let (loss, _) = diversity_loss(&uniform).unwrap();
        let expected = (h * w) as f64 / (parts * parts) as f64;
        assert!((loss - expected).abs() < 1e-12);
    }

    #[test]
    fn diversity_gradient_matches_finite_differences() {
        let predicted = random_simplex_mask(4, 3, 2, 9);
        let (_, grad) = diversity_loss(&predicted).unwrap();
        fd_check(
            predicted.data(),
            grad.data(),
            |x| {
                let p = Tensor::from_vec(predicted.dims(), x.to_vec()).unwrap();
                diversity_loss(&p).unwrap().0
            },
            1e-5,
            1e-5,
        );
    }

    #[test]
    fn combined_loss_adds_components_and_gradients() {
        let target = random_simplex_mask(3, 2, 2, 13);
        let predicted = random_simplex_mask(3, 2, 2, 14);
        let (lp, gp) = parsing_loss(&target, &predicted).unwrap();
        let (ld, gd) = diversity_loss(&predicted).unwrap();
        let (total, gt) = scc_loss(&target, &predicted).unwrap();
        assert!((total - (lp + ld)).abs() < 1e-12);
        for ((a, b), t) in gp.data().iter().zip(gd.data()).zip(gt.data()) {
            assert!((a + b - t).abs() < 1e-12);
        }
    }
}
