//! Channel pooling over feature maps.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// Global average pooling: per-channel mean over all spatial positions.
pub fn global_avg_pool(feature_map: &Tensor) -> Result<Vec<f64>> {
    let dims = feature_map.dims();
    if dims.len() != 3 {
        return Err(Error::ShapeMismatch {
            context: "global_avg_pool",
            expected: vec![3],
            actual: vec![dims.len()],
        });
    }
    let (channels, h, w) = (dims[0], dims[1], dims[2]);
    if h == 0 || w == 0 {
        return Err(Error::EmptyInput("global_avg_pool feature map"));
    }
    let inv = 1.0 / (h * w) as f64;
    let mut out = Vec::with_capacity(channels);
    for c in 0..channels {
        out.push(feature_map.plane(c).iter().sum::<f64>() * inv);
    }
    Ok(out)
}

/// Mask-weighted average pooling.
///
/// `out[c] = sum_{h,w} mask[h,w] * map[c,h,w] / (H*W)` — the divisor is the
/// full pixel count, so an all-ones mask reproduces [`global_avg_pool`]
/// exactly and an all-zero mask yields the zero vector.
pub fn masked_avg_pool(feature_map: &Tensor, mask: &Tensor) -> Result<Vec<f64>> {
    let dims = feature_map.dims();
    if dims.len() != 3 {
        return Err(Error::ShapeMismatch {
            context: "masked_avg_pool",
            expected: vec![3],
            actual: vec![dims.len()],
        });
    }
    let (channels, h, w) = (dims[0], dims[1], dims[2]);
    mask.expect_dims(&[h, w], "masked_avg_pool mask")?;
    if h == 0 || w == 0 {
        return Err(Error::EmptyInput("masked_avg_pool feature map"));
    }
    let inv = 1.0 / (h * w) as f64;
    let mask_data = mask.data();
    let mut out = Vec::with_capacity(channels);
    for c in 0..channels {
        let plane = feature_map.plane(c);
        let acc: f64 = plane.iter().zip(mask_data).map(|(f, m)| f * m).sum();
        out.push(acc * inv);
    }
    Ok(out)
}

/// Backward of [`global_avg_pool`]: spread each channel gradient uniformly.
pub fn global_avg_pool_backward(grad_out: &[f64], h: usize, w: usize) -> Tensor {
    let channels = grad_out.len();
    let inv = 1.0 / (h * w) as f64;
    let mut grad = Tensor::zeros(&[channels, h, w]);
    for (c, &g) in grad_out.iter().enumerate() {
        let hw = h * w;
        let base = c * hw;
        for i in 0..hw {
            grad.data_mut()[base + i] = g * inv;
        }
    }
    grad
}

/// Backward of [`masked_avg_pool`] with respect to both the map and the mask.
pub fn masked_avg_pool_backward(
    feature_map: &Tensor,
    mask: &Tensor,
    grad_out: &[f64],
) -> (Tensor, Tensor) {
    let dims = feature_map.dims();
    let (channels, h, w) = (dims[0], dims[1], dims[2]);
    debug_assert_eq!(grad_out.len(), channels);
    let inv = 1.0 / (h * w) as f64;
    let mut grad_map = Tensor::zeros(&[channels, h, w]);
    let mut grad_mask = Tensor::zeros(&[h, w]);
    let hw = h * w;
    for (c, &g) in grad_out.iter().enumerate() {
        let plane = feature_map.plane(c);
        let base = c * hw;
        for i in 0..hw {
            grad_map.data_mut()[base + i] = g * mask.data()[i] * inv;
            grad_mask.data_mut()[i] += g * plane[i] * inv;
        }
    }
    (grad_map, grad_mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map_1x2x2() -> Tensor {
        Tensor::from_vec(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    #[test]
    fn gap_of_known_map() {
        let out = global_avg_pool(&map_1x2x2()).unwrap();
        assert_eq!(out, vec![2.5]);
    }

    #[test]
    fn gap_of_constant_map() {
        let t = Tensor::from_vec(&[3, 2, 2], vec![7.25; 12]).unwrap();
        let out = global_avg_pool(&t).unwrap();
        assert_eq!(out, vec![7.25, 7.25, 7.25]);
    }

    #[test]
    fn gap_matches_double_loop() {
        let mut rng = crate::testutil::rng(11);
        let data: Vec<f64> = (0..4 * 6 * 6).map(|_| crate::testutil::unif(&mut rng)).collect();
        let t = Tensor::from_vec(&[4, 6, 6], data).unwrap();
        let out = global_avg_pool(&t).unwrap();
        for c in 0..4 {
            let mut acc = 0.0;
            for h in 0..6 {
                for w in 0..6 {
                    acc += t.get3(c, h, w);
                }
            }
            assert!((out[c] - acc / 36.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gap_rejects_empty_map() {
        let t = Tensor::from_vec(&[2, 0, 3], vec![]).unwrap();
        assert!(matches!(
            global_avg_pool(&t).unwrap_err(),
            Error::EmptyInput(_)
        ));
    }

    #[test]
    fn masked_pool_ones_equals_gap() {
        let t = map_1x2x2();
        let ones = Tensor::from_vec(&[2, 2], vec![1.0; 4]).unwrap();
        assert_eq!(
            masked_avg_pool(&t, &ones).unwrap(),
            global_avg_pool(&t).unwrap()
        );
    }

    #[test]
    fn masked_pool_zeros_annihilates() {
        let t = map_1x2x2();
        let zeros = Tensor::zeros(&[2, 2]);
        assert_eq!(masked_avg_pool(&t, &zeros).unwrap(), vec![0.0]);
    }

    #[test]
    fn masked_pool_checkerboard_matches_loop() {
        let mut rng = crate::testutil::rng(5);
        let data: Vec<f64> = (0..3 * 4 * 4).map(|_| crate::testutil::unif(&mut rng)).collect();
        let t = Tensor::from_vec(&[3, 4, 4], data).unwrap();
        let mask_data: Vec<f64> = (0..16).map(|i| ((i / 4 + i % 4) % 2) as f64).collect();
        let mask = Tensor::from_vec(&[4, 4], mask_data).unwrap();
        let out = masked_avg_pool(&t, &mask).unwrap();
        for c in 0..3 {
            let mut acc = 0.0;
            for h in 0..4 {
                for w in 0..4 {
                    acc += mask.get2(h, w) * t.get3(c, h, w);
                }
            }
            assert!((out[c] - acc / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_pool_rejects_shape_mismatch() {
        let t = map_1x2x2();
        let mask = Tensor::zeros(&[3, 2]);
        assert!(matches!(
            masked_avg_pool(&t, &mask).unwrap_err(),
            Error::ShapeMismatch { .. }
        ));
    }
}
