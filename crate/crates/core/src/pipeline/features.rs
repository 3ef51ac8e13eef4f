//! Per-sample forward pass and the matching backward composition.
//!
//! Forward: input -> extractor -> feature map F; part classifier -> soft
//! masks P; pooled features f_g = normalize(avg F) and
//! f_pk = normalize(mask-weighted avg of F). Backward folds gradients on
//! P and on the normalized features back into extractor and classifier
//! parameters, including the path through the mask inside the pooling.

use crate::error::Result;
use crate::numerics::part_classifier::{part_classifier_backward_cached, part_classifier_forward};
use crate::numerics::pool::{
    global_avg_pool, global_avg_pool_backward, masked_avg_pool, masked_avg_pool_backward,
};
use crate::numerics::tensor::{SoftMask, Tensor};
use crate::numerics::vec_ops::{l2_normalize, l2_normalize_backward, norm_l2};
use crate::pipeline::model::ModelParams;

/// Everything the forward pass computed for one sample.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub feature_map: Tensor,
    pub masks: SoftMask,
    pub global_raw: Vec<f64>,
    pub global: Vec<f64>,
    /// Pre-normalization pooled part features; `None` marks an exactly
    /// zero pooled vector (empty mask channel).
    pub parts_raw: Vec<Option<Vec<f64>>>,
    pub parts: Vec<Option<Vec<f64>>>,
}

impl ForwardCache {
    pub fn num_parts(&self) -> usize {
        self.parts.len()
    }
}

/// Gradients for the trainable trunk parameters.
#[derive(Debug, Clone)]
pub struct TrunkGrads {
    pub extractor_weight: Tensor,
    pub extractor_bias: Vec<f64>,
    pub classifier_kernel: Tensor,
    pub classifier_bias: Vec<f64>,
}

impl TrunkGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            extractor_weight: Tensor::zeros(params.extractor.weight.dims()),
            extractor_bias: vec![0.0; params.extractor.bias.len()],
            classifier_kernel: Tensor::zeros(params.classifier.kernel.dims()),
            classifier_bias: vec![0.0; params.classifier.bias.len()],
        }
    }

    pub fn accumulate(&mut self, other: &Self) {
        add_assign(self.extractor_weight.data_mut(), other.extractor_weight.data());
        add_assign(&mut self.extractor_bias, &other.extractor_bias);
        add_assign(self.classifier_kernel.data_mut(), other.classifier_kernel.data());
        add_assign(&mut self.classifier_bias, &other.classifier_bias);
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.extractor_weight.data_mut() {
            *v *= factor;
        }
        for v in self.extractor_bias.iter_mut() {
            *v *= factor;
        }
        for v in self.classifier_kernel.data_mut() {
            *v *= factor;
        }
        for v in self.classifier_bias.iter_mut() {
            *v *= factor;
        }
    }
}

fn add_assign(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Extract one [h, w] mask channel as its own tensor.
pub fn mask_channel(masks: &SoftMask, channel: usize) -> Tensor {
    let dims = masks.dims();
    Tensor::from_vec(&[dims[1], dims[2]], masks.plane(channel).to_vec())
        .expect("mask plane is finite")
}

/// Run the trunk forward for one input grid.
pub fn forward_sample(params: &ModelParams, input: &Tensor) -> Result<ForwardCache> {
    let feature_map = params.extractor.forward(input)?;
    let masks = part_classifier_forward(&params.classifier, &feature_map)?;
    let parts = masks.dims()[0];

    let global_raw = global_avg_pool(&feature_map)?;
    let global = l2_normalize(&global_raw)?;

    let mut parts_raw = Vec::with_capacity(parts);
    let mut parts_norm = Vec::with_capacity(parts);
    for k in 0..parts {
        let channel = mask_channel(&masks, k);
        let pooled = masked_avg_pool(&feature_map, &channel)?;
        if norm_l2(&pooled) == 0.0 {
            parts_raw.push(None);
            parts_norm.push(None);
        } else {
            let normalized = l2_normalize(&pooled)?;
            parts_raw.push(Some(pooled));
            parts_norm.push(Some(normalized));
        }
    }

    Ok(ForwardCache {
        feature_map,
        masks,
        global_raw,
        global,
        parts_raw,
        parts: parts_norm,
    })
}

/// Fold upstream gradients back into trunk parameter gradients.
///
/// `grad_masks` is the gradient on the soft masks (mask losses);
/// `grad_global` and `grad_parts` are gradients on the normalized pooled
/// features (memory and classification losses). The part-feature path
/// contributes to both the feature map and, through the pooling weights,
/// to the masks, which then flow through the classifier softmax.
pub fn backward_sample(
    params: &ModelParams,
    input: &Tensor,
    cache: &ForwardCache,
    grad_masks: Option<&Tensor>,
    grad_global: Option<&[f64]>,
    grad_parts: &[Option<Vec<f64>>],
) -> Result<TrunkGrads> {
    let fdims = cache.feature_map.dims();
    let (h, w) = (fdims[1], fdims[2]);
    let mut grad_map = Tensor::zeros(fdims);
    let mut grad_mask_total = match grad_masks {
        Some(g) => {
            g.expect_dims(cache.masks.dims(), "backward_sample grad_masks")?;
            g.clone()
        }
        None => Tensor::zeros(cache.masks.dims()),
    };

    if let Some(grad_global) = grad_global {
        let d_raw = l2_normalize_backward(&cache.global_raw, grad_global);
        let spread = global_avg_pool_backward(&d_raw, h, w);
        add_assign(grad_map.data_mut(), spread.data());
    }

    for (k, grad_part) in grad_parts.iter().enumerate() {
        let Some(grad_part) = grad_part else { continue };
        let Some(raw) = &cache.parts_raw[k] else {
            continue;
        };
        let d_raw = l2_normalize_backward(raw, grad_part);
        let channel = mask_channel(&cache.masks, k);
        let (d_map, d_mask) = masked_avg_pool_backward(&cache.feature_map, &channel, &d_raw);
        add_assign(grad_map.data_mut(), d_map.data());
        let hw = h * w;
        add_assign(
            &mut grad_mask_total.data_mut()[k * hw..(k + 1) * hw],
            d_mask.data(),
        );
    }

    let (classifier_grads, grad_map_from_classifier) = part_classifier_backward_cached(
        &params.classifier,
        &cache.feature_map,
        &cache.masks,
        &grad_mask_total,
    )?;
    add_assign(grad_map.data_mut(), grad_map_from_classifier.data());

    let extractor_grads = params.extractor.backward(input, &grad_map)?;
    Ok(TrunkGrads {
        extractor_weight: extractor_grads.weight,
        extractor_bias: extractor_grads.bias,
        classifier_kernel: classifier_grads.kernel,
        classifier_bias: classifier_grads.bias,
    })
}

/// Fixed horizontal stripe masks: `parts - 1` equal-height bands over the
/// full image, background channel empty. The comparison baseline for
/// everything the parsed masks buy.
pub fn stripe_masks(h: usize, w: usize, parts: usize) -> Tensor {
    let bands = parts - 1;
    let mut mask = Tensor::zeros(&[parts, h, w]);
    for row in 0..h {
        let band = ((row * bands) / h).min(bands - 1);
        for col in 0..w {
            mask.set3(band, row, col, 1.0);
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::config::PipelineConfig;
    use crate::pipeline::model::ModelParams;
    use crate::testutil::{fd_check, rng, unif};

    fn tiny_config() -> PipelineConfig {
        PipelineConfig::load(
            None,
            &[
                "input_channels = 2".into(),
                "feature_dim = 3".into(),
                "height = 4".into(),
                "width = 3".into(),
                "parts = 3".into(),
                "person_top = 0".into(),
                "person_bottom = 4".into(),
                "person_left = 0".into(),
                "person_right = 3".into(),
                "offset_max = 0".into(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn forward_shapes_and_norms() {
        let config = tiny_config();
        let params = ModelParams::init(&config, 3).unwrap();
        let mut r = rng(4);
        let input =
            Tensor::from_vec(&[2, 4, 3], (0..24).map(|_| unif(&mut r)).collect()).unwrap();
        let cache = forward_sample(&params, &input).unwrap();
        assert_eq!(cache.feature_map.dims(), &[3, 4, 3]);
        assert_eq!(cache.masks.dims(), &[3, 4, 3]);
        assert!((norm_l2(&cache.global) - 1.0).abs() < 1e-9);
        for part in cache.parts.iter().flatten() {
            assert!((norm_l2(part) - 1.0).abs() < 1e-9);
        }
    }

    // End-to-end finite differences through the full trunk: a probe loss
    // that touches masks, the global feature, and every part feature
    // exactly the way the training losses do.
    #[test]
    fn composed_backward_matches_finite_differences() {
        let config = tiny_config();
        let params = ModelParams::init(&config, 7).unwrap();
        let mut r = rng(8);
        let input =
            Tensor::from_vec(&[2, 4, 3], (0..24).map(|_| unif(&mut r)).collect()).unwrap();
        let probe_masks: Vec<f64> = (0..36).map(|_| unif(&mut r)).collect();
        let probe_global: Vec<f64> = (0..3).map(|_| unif(&mut r)).collect();
        let probe_parts: Vec<Vec<f64>> =
            (0..3).map(|_| (0..3).map(|_| unif(&mut r)).collect()).collect();

        let probe_loss = |p: &ModelParams| -> f64 {
            let cache = forward_sample(p, &input).unwrap();
            let mut loss = 0.0;
            for (m, u) in cache.masks.data().iter().zip(&probe_masks) {
                loss += m * u;
            }
            for (g, u) in cache.global.iter().zip(&probe_global) {
                loss += g * u;
            }
            for (k, part) in cache.parts.iter().enumerate() {
                if let Some(part) = part {
                    for (x, u) in part.iter().zip(&probe_parts[k]) {
                        loss += x * u;
                    }
                }
            }
            loss
        };

        let cache = forward_sample(&params, &input).unwrap();
        let grad_masks = Tensor::from_vec(&[3, 4, 3], probe_masks.clone()).unwrap();
        let grad_parts: Vec<Option<Vec<f64>>> =
            probe_parts.iter().map(|p| Some(p.clone())).collect();
        let grads = backward_sample(
            &params,
            &input,
            &cache,
            Some(&grad_masks),
            Some(&probe_global),
            &grad_parts,
        )
        .unwrap();

        let packed: Vec<f64> = params
            .extractor
            .weight
            .data()
            .iter()
            .chain(&params.extractor.bias)
            .chain(params.classifier.kernel.data())
            .chain(&params.classifier.bias)
            .cloned()
            .collect();
        let analytic: Vec<f64> = grads
            .extractor_weight
            .data()
            .iter()
            .chain(&grads.extractor_bias)
            .chain(grads.classifier_kernel.data())
            .chain(&grads.classifier_bias)
            .cloned()
            .collect();
        let base = params.clone();
        fd_check(
            &packed,
            &analytic,
            move |x| {
                let mut p = base.clone();
                let ew = p.extractor.weight.len();
                let eb = p.extractor.bias.len();
                let ck = p.classifier.kernel.len();
                p.extractor.weight =
                    Tensor::from_vec(base.extractor.weight.dims(), x[..ew].to_vec()).unwrap();
                p.extractor.bias = x[ew..ew + eb].to_vec();
                p.classifier.kernel = Tensor::from_vec(
                    base.classifier.kernel.dims(),
                    x[ew + eb..ew + eb + ck].to_vec(),
                )
                .unwrap();
                p.classifier.bias = x[ew + eb + ck..].to_vec();
                probe_loss(&p)
            },
            1e-6,
            1e-5,
        );
    }

    #[test]
    fn stripes_cover_rows_in_bands() {
        let mask = stripe_masks(6, 2, 4);
        // 3 bands of 2 rows each; background channel empty.
        for row in 0..6 {
            let band = row / 2;
            for col in 0..2 {
                assert_eq!(mask.get3(band, row, col), 1.0);
            }
        }
        assert!(mask.plane(3).iter().all(|&v| v == 0.0));
    }
}
