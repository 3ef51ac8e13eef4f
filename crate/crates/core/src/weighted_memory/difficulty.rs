//! Difficulty scores and batch weights.
//!
//! A part feature whose neighborhood looks like its sample's global
//! neighborhood carries reliable information: its difficulty score is the
//! IoU of the two kNN sets. The global score is the mean over parts. The
//! two weighting directions then follow: global updates upweight hard
//! samples (1 - alpha), part updates downweight them (alpha), both
//! l1-normalized within the batch.

use crate::error::{Error, Result};
use crate::weighted_memory::bank::BatchWeights;

/// Per-sample difficulty: one score per part plus the global mean.
#[derive(Debug, Clone)]
pub struct DifficultyScores {
    pub global: f64,
    pub parts: Vec<f64>,
}

/// IoU-based difficulty of one sample.
///
/// `knn_parts[k] = None` marks a part whose pooled feature was empty; that
/// part scores 0 without a neighbor query and still enters the global
/// mean, which keeps `global == mean(parts)` exact.
pub fn difficulty_scores(
    knn_global: &[usize],
    knn_parts: &[Option<&[usize]>],
) -> Result<DifficultyScores> {
    if knn_global.is_empty() {
        return Err(Error::EmptyInput("difficulty global neighbor set"));
    }
    if knn_parts.is_empty() {
        return Err(Error::EmptyInput("difficulty part neighbor sets"));
    }
    let mut parts = Vec::with_capacity(knn_parts.len());
    for row in knn_parts {
        match row {
            None => parts.push(0.0),
            Some(row) => {
                if row.is_empty() {
                    return Err(Error::EmptyInput("difficulty part neighbor set"));
                }
                parts.push(iou(knn_global, row));
            }
        }
    }
    let global = parts.iter().sum::<f64>() / parts.len() as f64;
    Ok(DifficultyScores { global, parts })
}

fn iou(a: &[usize], b: &[usize]) -> f64 {
    let sa: std::collections::BTreeSet<usize> = a.iter().cloned().collect();
    let sb: std::collections::BTreeSet<usize> = b.iter().cloned().collect();
    let inter = sa.intersection(&sb).count();
    let union = sa.union(&sb).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// l1-normalize per-sample difficulties into batch update weights.
///
/// Global weight of sample i is `(1 - alpha_g_i) / sum_j (1 - alpha_g_j)`;
/// part weight is `alpha_p_ik / sum_j alpha_p_jk`. A denominator of zero
/// (every sample maximally easy, or a part scoring zero across the batch)
/// degenerates to uniform weights for that space with a stderr warning.
pub fn batch_weights(alphas: &[DifficultyScores]) -> Result<BatchWeights> {
    let b = alphas.len();
    if b == 0 {
        return Err(Error::EmptyInput("batch_weights alphas"));
    }
    let num_parts = alphas[0].parts.len();
    for a in alphas {
        if a.parts.len() != num_parts {
            return Err(Error::ShapeMismatch {
                context: "batch_weights parts",
                expected: vec![num_parts],
                actual: vec![a.parts.len()],
            });
        }
    }

    let uniform = 1.0 / b as f64;
    let global_denominator: f64 = alphas.iter().map(|a| 1.0 - a.global).sum();
    let global: Vec<f64> = if global_denominator > 0.0 {
        alphas
            .iter()
            .map(|a| (1.0 - a.global) / global_denominator)
            .collect()
    } else {
        eprintln!("warning: degenerate batch, all global difficulties are 0; using uniform weights");
        vec![uniform; b]
    };

    let mut parts = vec![vec![0.0; num_parts]; b];
    for k in 0..num_parts {
        let denominator: f64 = alphas.iter().map(|a| a.parts[k]).sum();
        if denominator > 0.0 {
            for (i, a) in alphas.iter().enumerate() {
                parts[i][k] = a.parts[k] / denominator;
            }
        } else {
            eprintln!(
                "warning: degenerate batch, part {k} difficulties all zero; using uniform weights"
            );
            for row in parts.iter_mut() {
                row[k] = uniform;
            }
        }
    }
    Ok(BatchWeights { global, parts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sets_score_one() {
        let g = vec![3, 1, 4];
        let scores = difficulty_scores(&g, &[Some(&[4, 3, 1])]).unwrap();
        assert_eq!(scores.parts[0], 1.0);
        assert_eq!(scores.global, 1.0);
    }

    #[test]
    fn disjoint_sets_score_zero() {
        let g = vec![0, 1];
        let scores = difficulty_scores(&g, &[Some(&[2, 3])]).unwrap();
        assert_eq!(scores.parts[0], 0.0);
    }

    #[test]
    fn five_of_fifteen_is_one_third() {
        // |intersection| = 5, |union| = 15.
        let g: Vec<usize> = (0..10).collect();
        let p: Vec<usize> = (5..15).collect();
        let scores = difficulty_scores(&g, &[Some(&p)]).unwrap();
        assert!((scores.parts[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn global_is_mean_of_parts_including_empty() {
        let g = vec![0, 1, 2];
        let scores =
            difficulty_scores(&g, &[Some(&[0, 1, 2]), None, Some(&[0, 5, 6])]).unwrap();
        assert_eq!(scores.parts[1], 0.0);
        let mean = scores.parts.iter().sum::<f64>() / 3.0;
        assert!((scores.global - mean).abs() < 1e-15);
    }

    fn alpha(global: f64, parts: &[f64]) -> DifficultyScores {
        DifficultyScores {
            global,
            parts: parts.to_vec(),
        }
    }

    #[test]
    fn global_weights_follow_one_minus_alpha() {
        let weights = batch_weights(&[alpha(0.2, &[0.2]), alpha(0.6, &[0.6])]).unwrap();
        assert!((weights.global[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((weights.global[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn equal_alphas_give_uniform_weights() {
        let weights = batch_weights(&vec![alpha(0.4, &[0.3, 0.5]); 4]).unwrap();
        for w in &weights.global {
            assert!((w - 0.25).abs() < 1e-12);
        }
        for row in &weights.parts {
            assert!((row[0] - 0.25).abs() < 1e-12);
            assert!((row[1] - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn single_sample_batch_gets_weight_one() {
        let weights = batch_weights(&[alpha(0.4, &[0.7])]).unwrap();
        assert!((weights.global[0] - 1.0).abs() < 1e-12);
        assert!((weights.parts[0][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_batch_falls_back_to_uniform() {
        // All alphas 1.0: global denominator is 0; all parts 0.0: part
        // denominator is 0. Both fall back to uniform.
        let weights = batch_weights(&[alpha(1.0, &[0.0]), alpha(1.0, &[0.0])]).unwrap();
        assert_eq!(weights.global, vec![0.5, 0.5]);
        assert_eq!(weights.parts, vec![vec![0.5], vec![0.5]]);
    }

    #[test]
    fn weights_sum_to_one_per_space() {
        let mut r = crate::testutil::rng(17);
        let alphas: Vec<DifficultyScores> = (0..6)
            .map(|_| {
                let parts: Vec<f64> = (0..3)
                    .map(|_| crate::testutil::unif(&mut r).abs().min(0.99))
                    .collect();
                let global = parts.iter().sum::<f64>() / 3.0;
                DifficultyScores { global, parts }
            })
            .collect();
        let weights = batch_weights(&alphas).unwrap();
        assert!((weights.global.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for k in 0..3 {
            let s: f64 = weights.parts.iter().map(|row| row[k]).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        assert!(weights.global.iter().all(|&w| w >= 0.0));
    }
}
