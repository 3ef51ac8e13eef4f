//! Pseudo-label refinement: part labels are smoothed toward uniform in
//! proportion to their unreliability, and the global label absorbs a
//! difficulty-weighted blend of the part predictions as soft supervision.

use crate::error::{Error, Result};
use crate::numerics::vec_ops::softmax;

/// Smooth a one-hot label by part difficulty:
/// `alpha * y + (1 - alpha) * uniform`.
pub fn refine_part_label(label: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            message: format!("must be in [0, 1], got {alpha}"),
        });
    }
    if label.is_empty() {
        return Err(Error::EmptyInput("refine_part_label label"));
    }
    let uniform = 1.0 / label.len() as f64;
    Ok(label
        .iter()
        .map(|y| alpha * y + (1.0 - alpha) * uniform)
        .collect())
}

/// Softmax over the per-part difficulties: the share each part prediction
/// gets in the distilled global label.
pub fn part_agreement_weights(alphas: &[f64]) -> Result<Vec<f64>> {
    if alphas.is_empty() {
        return Err(Error::EmptyInput("part_agreement_weights alphas"));
    }
    Ok(softmax(alphas))
}

/// Distill part predictions into the global label:
/// `beta * y + (1 - beta) * sum_k w[k] * q_parts[k]`.
///
/// Part predictions are treated as constants here — labels must not open a
/// gradient path back into the part heads. Parts with no prediction
/// (empty part feature) are excluded and the agreement weights are
/// renormalized over the parts that remain.
pub fn distill_global_label(
    label: &[f64],
    beta: f64,
    agreement: &[f64],
    part_predictions: &[Option<&[f64]>],
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidParameter {
            name: "beta",
            message: format!("must be in [0, 1], got {beta}"),
        });
    }
    if agreement.len() != part_predictions.len() {
        return Err(Error::ShapeMismatch {
            context: "distill_global_label weights",
            expected: vec![part_predictions.len()],
            actual: vec![agreement.len()],
        });
    }
    let available_mass: f64 = part_predictions
        .iter()
        .zip(agreement)
        .filter(|(q, _)| q.is_some())
        .map(|(_, w)| w)
        .sum();
    let mut out: Vec<f64> = label.iter().map(|y| beta * y).collect();
    if available_mass > 0.0 {
        for (q, &w) in part_predictions.iter().zip(agreement) {
            let Some(q) = q else { continue };
            if q.len() != label.len() {
                return Err(Error::ShapeMismatch {
                    context: "distill_global_label predictions",
                    expected: vec![label.len()],
                    actual: vec![q.len()],
                });
            }
            let share = (1.0 - beta) * w / available_mass;
            for (o, &qi) in out.iter_mut().zip(*q) {
                *o += share * qi;
            }
        }
    } else {
        // No usable part predictions: fall back to the label alone,
        // renormalized so the result stays a distribution.
        let uniform = 1.0 / label.len() as f64;
        for o in out.iter_mut() {
            *o += (1.0 - beta) * uniform;
        }
    }
    Ok(out)
}
