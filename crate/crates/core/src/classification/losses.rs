//! The classification loss over refined labels, with gradients taken at
//! the logits (softmax and cross-entropy fused), plus the total objective
//! that sums the three training losses.

use crate::error::{Error, Result};

/// Cross-entropy of one distribution against a refined label, with the
/// gradient at the logits: `q - y`.
fn soft_cross_entropy(q: &[f64], y: &[f64], context: &'static str) -> Result<(f64, Vec<f64>)> {
    if q.len() != y.len() {
        return Err(Error::ShapeMismatch {
            context: "cross entropy",
            expected: vec![y.len()],
            actual: vec![q.len()],
        });
    }
    let mut loss = 0.0;
    for (&qi, &yi) in q.iter().zip(y) {
        if yi != 0.0 {
            if qi <= 0.0 {
                return Err(Error::NonPositiveProbability(context));
            }
            loss -= yi * qi.ln();
        }
    }
    let grad = q.iter().zip(y).map(|(qi, yi)| qi - yi).collect();
    Ok((loss, grad))
}

/// Classification loss over the global head and the part heads.
///
/// `-y_g . ln q_g - (1/l) sum_k y_pk . ln q_pk`; returns per-head logit
/// gradients. Missing part predictions (empty part features) contribute
/// nothing and their gradient slot stays `None`.
pub fn id_loss(
    q_global: &[f64],
    q_parts: &[Option<&[f64]>],
    y_global: &[f64],
    y_parts: &[Vec<f64>],
) -> Result<(f64, Vec<f64>, Vec<Option<Vec<f64>>>)> {
    if q_parts.len() != y_parts.len() {
        return Err(Error::ShapeMismatch {
            context: "id_loss parts",
            expected: vec![y_parts.len()],
            actual: vec![q_parts.len()],
        });
    }
    let (mut loss, grad_global) = soft_cross_entropy(q_global, y_global, "id_loss global")?;
    let l = q_parts.len().max(1) as f64;
    let mut grad_parts: Vec<Option<Vec<f64>>> = vec![None; q_parts.len()];
    for (k, (q, y)) in q_parts.iter().zip(y_parts).enumerate() {
        let Some(q) = q else { continue };
        let (part_loss, mut part_grad) = soft_cross_entropy(q, y, "id_loss part")?;
        loss += part_loss / l;
        for g in part_grad.iter_mut() {
            *g /= l;
        }
        grad_parts[k] = Some(part_grad);
    }
    Ok((loss, grad_global, grad_parts))
}

/// Total objective: sum of the parsing, memory, and classification losses.
/// Gradient additivity is structural — each component owns disjoint
/// gradient slots that the training step accumulates — so this helper only
/// folds the scalars.
pub fn total_loss(scc: f64, memory: f64, id: f64) -> f64 {
    scc + memory + id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::vec_ops::softmax;
    use crate::testutil::{fd_check, rng, unif};

    #[test]
    fn loss_at_label_equals_label_entropy() {
        let y = vec![0.7, 0.2, 0.1];
        let (loss, grad_g, _) = id_loss(&y, &[], &y, &[]).unwrap();
        let entropy: f64 = -y.iter().map(|p| p * p.ln()).sum::<f64>();
        assert!((loss - entropy).abs() < 1e-12);
        for g in grad_g {
            assert!(g.abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_one_hot_prediction_approaches_zero() {
        let y = vec![1.0, 0.0];
        let q = vec![1.0 - 1e-12, 1e-12];
        let (loss, _, _) = id_loss(&q, &[], &y, &[]).unwrap();
        assert!(loss < 1e-9);
    }

    #[test]
    fn zero_probability_at_supported_class_is_error() {
        let y = vec![1.0, 0.0];
        let q = vec![0.0, 1.0];
        assert!(matches!(
            id_loss(&q, &[], &y, &[]).unwrap_err(),
            Error::NonPositiveProbability(_)
        ));
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        for seed in 0..3 {
            let mut r = rng(400 + seed);
            let zg: Vec<f64> = (0..4).map(|_| unif(&mut r)).collect();
            let zp: Vec<f64> = (0..4).map(|_| unif(&mut r)).collect();
            let y_global: Vec<f64> = {
                let raw: Vec<f64> = (0..4).map(|_| unif(&mut r).abs() + 0.05).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / s).collect()
            };
            let y_part: Vec<f64> = {
                let raw: Vec<f64> = (0..4).map(|_| unif(&mut r).abs() + 0.05).collect();
                let s: f64 = raw.iter().sum();
                raw.into_iter().map(|v| v / s).collect()
            };

            let q_global = softmax(&zg);
            let q_part = softmax(&zp);
            let (_, grad_g, grad_p) = id_loss(
                &q_global,
                &[Some(q_part.as_slice())],
                &y_global,
                &[y_part.clone()],
            )
            .unwrap();

            let packed: Vec<f64> = zg.iter().chain(&zp).cloned().collect();
            let analytic: Vec<f64> = grad_g
                .iter()
                .chain(grad_p[0].as_ref().unwrap())
                .cloned()
                .collect();
            let (yg, yp) = (y_global.clone(), y_part.clone());
            fd_check(
                &packed,
                &analytic,
                move |x| {
                    let qg = softmax(&x[..4]);
                    let qp = softmax(&x[4..]);
                    id_loss(&qg, &[Some(qp.as_slice())], &yg, &[yp.clone()])
                        .unwrap()
                        .0
                },
                1e-5,
                1e-5,
            );
        }
    }

    #[test]
    fn total_is_plain_sum() {
        assert_eq!(total_loss(1.0, 2.0, 3.0), 6.0);
        assert_eq!(total_loss(0.7, 0.0, 0.3), 1.0);
    }
}
