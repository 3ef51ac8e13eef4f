//! Contrastive losses against the memory bank.
//!
//! The weighted NCE places the sample weight inside the log numerator, so
//! the weight contributes an additive `-ln w` to the loss and nothing to
//! the feature gradient; that identity is asserted in the tests. The part
//! separation loss pushes each part feature toward its own cluster's
//! centroid for that part and away from the same cluster's other part
//! centroids.

use crate::error::{Error, Result};
use crate::numerics::vec_ops::{dot, log_sum_exp, softmax};
use crate::weighted_memory::bank::MemoryBank;

/// Per-space features of one sample entering the loss.
#[derive(Debug, Clone)]
pub struct SampleFeatures<'a> {
    pub global: &'a [f64],
    /// One entry per part space; `None` parts are skipped and counted.
    pub parts: Vec<Option<&'a [f64]>>,
}

/// Gradients mirroring [`SampleFeatures`].
#[derive(Debug, Clone)]
pub struct FeatureGrads {
    pub global: Vec<f64>,
    pub parts: Vec<Option<Vec<f64>>>,
}

/// One softmax-over-centroids term: loss and gradient with respect to f.
fn nce_term(
    feature: &[f64],
    centroids: &[Vec<f64>],
    own: usize,
    weight: f64,
    temperature: f64,
) -> (f64, Vec<f64>) {
    let logits: Vec<f64> = centroids
        .iter()
        .map(|c| dot(feature, c) / temperature)
        .collect();
    let lse = log_sum_exp(&logits);
    let loss = -(weight.ln()) - logits[own] + lse;
    let probs = softmax(&logits);
    let mut grad = vec![0.0; feature.len()];
    for (p, c) in probs.iter().zip(centroids) {
        for (g, x) in grad.iter_mut().zip(c) {
            *g += p * x / temperature;
        }
    }
    for (g, x) in grad.iter_mut().zip(&centroids[own]) {
        *g -= x / temperature;
    }
    (loss, grad)
}

/// Weighted cluster-contrastive loss of one sample.
///
/// Global term plus the average over part spaces, each a softmax over the
/// bank's centroids for that space with the sample weight in the
/// numerator. Empty parts contribute nothing; the count of skipped parts
/// is returned alongside.
pub fn weighted_nce_loss(
    features: &SampleFeatures,
    bank: &MemoryBank,
    label: usize,
    weight_global: f64,
    weights_parts: &[f64],
    temperature: f64,
) -> Result<(f64, FeatureGrads, usize)> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter {
            name: "temperature",
            message: format!("must be positive, got {temperature}"),
        });
    }
    if label >= bank.num_clusters() {
        return Err(Error::UnknownLabel {
            label: label as i64,
        });
    }
    if features.parts.len() != bank.num_parts() || weights_parts.len() != bank.num_parts() {
        return Err(Error::ShapeMismatch {
            context: "weighted_nce_loss parts",
            expected: vec![bank.num_parts()],
            actual: vec![features.parts.len(), weights_parts.len()],
        });
    }
    if weight_global <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "weight_global",
            message: "zero or negative sample weight makes the loss undefined".into(),
        });
    }

    let (mut loss, grad_global) =
        nce_term(features.global, &bank.global, label, weight_global, temperature);

    let num_parts = bank.num_parts() as f64;
    let mut grad_parts: Vec<Option<Vec<f64>>> = vec![None; bank.num_parts()];
    let mut skipped = 0usize;
    for (k, part) in features.parts.iter().enumerate() {
        let Some(part) = part else {
            skipped += 1;
            continue;
        };
        let w = weights_parts[k];
        if w <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "weights_parts",
                message: format!("part {k} weight must be positive, got {w}"),
            });
        }
        let (part_loss, mut part_grad) =
            nce_term(part, &bank.parts[k], label, w, temperature);
        loss += part_loss / num_parts;
        for g in part_grad.iter_mut() {
            *g /= num_parts;
        }
        grad_parts[k] = Some(part_grad);
    }

    Ok((
        loss,
        FeatureGrads {
            global: grad_global,
            parts: grad_parts,
        },
        skipped,
    ))
}

/// Part separation loss of one sample.
///
/// For each part k, a softmax over the sample's own cluster centroids
/// across all part spaces, scored at part k. Averaged over parts; empty
/// parts are skipped.
pub fn part_separation_loss(
    parts: &[Option<&[f64]>],
    own_part_centroids: &[Vec<f64>],
    temperature: f64,
) -> Result<(f64, Vec<Option<Vec<f64>>>, usize)> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter {
            name: "temperature",
            message: format!("must be positive, got {temperature}"),
        });
    }
    let l = own_part_centroids.len();
    if l == 0 {
        return Err(Error::EmptyInput("part_separation_loss centroids"));
    }
    if parts.len() != l {
        return Err(Error::ShapeMismatch {
            context: "part_separation_loss parts",
            expected: vec![l],
            actual: vec![parts.len()],
        });
    }
    let mut loss = 0.0;
    let mut grads: Vec<Option<Vec<f64>>> = vec![None; l];
    let mut skipped = 0usize;
    for (k, part) in parts.iter().enumerate() {
        let Some(feature) = part else {
            skipped += 1;
            continue;
        };
        let (term, mut grad) = nce_term(feature, own_part_centroids, k, 1.0, temperature);
        loss += term / l as f64;
        for g in grad.iter_mut() {
            *g /= l as f64;
        }
        grads[k] = Some(grad);
    }
    Ok((loss, grads, skipped))
}

/// Combined memory loss: weighted NCE plus part separation, gradients
/// summed per part feature.
#[allow(clippy::too_many_arguments)]
pub fn weighted_memory_loss(
    features: &SampleFeatures,
    bank: &MemoryBank,
    label: usize,
    weight_global: f64,
    weights_parts: &[f64],
    temperature: f64,
) -> Result<(f64, FeatureGrads, usize)> {
    let (nce, mut grads, skipped_nce) = weighted_nce_loss(
        features,
        bank,
        label,
        weight_global,
        weights_parts,
        temperature,
    )?;
    let own_centroids: Vec<Vec<f64>> = bank
        .parts
        .iter()
        .map(|space| space[label].clone())
        .collect();
    let (sep, sep_grads, _) =
        part_separation_loss(&features.parts, &own_centroids, temperature)?;
    for (dst, src) in grads.parts.iter_mut().zip(sep_grads) {
        match (dst, src) {
            (Some(dst), Some(src)) => {
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
            (dst @ None, Some(src)) => *dst = Some(src),
            _ => {}
        }
    }
    Ok((nce + sep, grads, skipped_nce))
}
