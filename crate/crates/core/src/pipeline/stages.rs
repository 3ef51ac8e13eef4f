//! The two alternating stages of an epoch.
//!
//! Clustering stage: with parameters frozen, extract features, assign
//! pseudo identity labels, parse pseudo part masks, and (re)initialize the
//! memory. Training stage: with labels and masks fixed, run SGD over
//! identity-balanced batches on the sum of the parsing, memory, and
//! classification losses, updating the memory after every step.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::classification::head::{head_backward_from_logits, head_forward, LinearHeadParams};
use crate::classification::losses::id_loss;
use crate::classification::refine::{
    distill_global_label, part_agreement_weights, refine_part_label,
};
use crate::error::{Error, Result};
use crate::id_clustering::dbscan::{dbscan, PseudoLabels, OUTLIER};
use crate::id_clustering::init::{init_memory, SpaceFeatures};
use crate::id_clustering::jaccard::k_reciprocal_jaccard;
use crate::id_clustering::knn::nearest_neighbors;
use crate::numerics::tensor::{SoftMask, Tensor};
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::features::{backward_sample, forward_sample, ForwardCache, TrunkGrads};
use crate::pipeline::model::{HeadSet, ModelParams};
use crate::pipeline::synth::SyntheticDataset;
use crate::scc::{generate_pseudo_masks, scc_loss, smooth_masks};
use crate::weighted_memory::bank::{
    average_update_weights, hardest_update_weights, BatchWeights, MemoryBank, MemorySample,
    UpdateStrategy,
};
use crate::weighted_memory::difficulty::{batch_weights, difficulty_scores, DifficultyScores};
use crate::weighted_memory::losses::{weighted_memory_loss, SampleFeatures};

/// Everything the clustering stage hands to the training stage.
#[derive(Debug, Clone)]
pub struct ClusteringProducts {
    pub labels: PseudoLabels,
    /// Per-sample smoothed pseudo masks.
    pub masks: Vec<SoftMask>,
    pub bank: MemoryBank,
}

/// Forward the whole dataset with frozen parameters.
pub fn extract_all(params: &ModelParams, dataset: &SyntheticDataset) -> Result<Vec<ForwardCache>> {
    dataset
        .samples
        .iter()
        .map(|s| forward_sample(params, &s.input))
        .collect()
}

/// Clustering stage of one epoch. Parameters are read-only here; label
/// assignment, per-sample mask parsing, mask smoothing against
/// `prev_masks`, and memory initialization all happen on frozen features.
pub fn clustering_stage(
    dataset: &SyntheticDataset,
    params: &ModelParams,
    config: &PipelineConfig,
    prev_masks: Option<&[SoftMask]>,
    mask_momentum: f64,
) -> Result<ClusteringProducts> {
    let caches = extract_all(params, dataset)?;

    // Identity pseudo labels from global features.
    let globals: Vec<Vec<f64>> = caches.iter().map(|c| c.global.clone()).collect();
    let distances = k_reciprocal_jaccard(&globals, config.reciprocal_k, config.reciprocal_k2)?;
    let labels = dbscan(&distances, config.dbscan_eps, config.dbscan_min_samples)?;
    if labels.num_clusters() == 0 {
        return Err(Error::AllOutliers {
            num_samples: labels.labels.len(),
        });
    }

    // Pseudo parsing masks, smoothed across epochs by the height-ordered
    // channel correspondence.
    let eta = config.eta();
    let mut masks = Vec::with_capacity(caches.len());
    for (i, cache) in caches.iter().enumerate() {
        let hard = generate_pseudo_masks(&cache.feature_map, eta, config.parts)?;
        let smoothed = match prev_masks {
            Some(prev) => smooth_masks(&prev[i], &hard, mask_momentum)?,
            None => hard,
        };
        masks.push(smoothed);
    }

    // Memory from cluster means, outliers excluded.
    let spaces = SpaceFeatures {
        global: globals,
        parts: (0..config.parts)
            .map(|k| caches.iter().map(|c| c.parts[k].clone()).collect())
            .collect(),
    };
    let bank = init_memory(
        &spaces,
        &labels,
        config.memory_momentum,
        config.temperature,
        config.strategy()?,
    )?;

    Ok(ClusteringProducts {
        labels,
        masks,
        bank,
    })
}

/// Per-sample difficulty scores from dataset-wide kNN on the current
/// features. Parameters are frozen between the clustering stage and the
/// first gradient step, so scoring here measures the same features the
/// clustering stage saw.
pub fn dataset_difficulty(
    caches: &[ForwardCache],
    k: usize,
) -> Result<Vec<DifficultyScores>> {
    let n = caches.len();
    let parts = caches.first().map(|c| c.num_parts()).unwrap_or(0);
    let globals: Vec<Vec<f64>> = caches.iter().map(|c| c.global.clone()).collect();
    let knn_global = nearest_neighbors(&globals, k)?;

    // Part kNN runs over the subset of samples whose part feature exists;
    // neighbor ids are mapped back to dataset indices.
    let mut part_rows: Vec<Vec<Option<Vec<usize>>>> = vec![vec![None; n]; parts];
    for part in 0..parts {
        let present: Vec<usize> = (0..n).filter(|&i| caches[i].parts[part].is_some()).collect();
        if present.len() < 2 {
            continue;
        }
        let features: Vec<Vec<f64>> = present
            .iter()
            .map(|&i| caches[i].parts[part].clone().unwrap())
            .collect();
        let sets = nearest_neighbors(&features, k)?;
        for (local, &sample) in present.iter().enumerate() {
            part_rows[part][sample] =
                Some(sets.row(local).iter().map(|&j| present[j]).collect());
        }
    }

    let mut alphas = Vec::with_capacity(n);
    for i in 0..n {
        let rows: Vec<Option<&[usize]>> = (0..parts)
            .map(|part| part_rows[part][i].as_deref())
            .collect();
        alphas.push(difficulty_scores(knn_global.row(i), &rows)?);
    }
    Ok(alphas)
}

/// Scalar loss pieces of one iteration, averaged over the batch.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub scc: f64,
    pub memory: f64,
    pub id: f64,
}

/// What the training stage reports back.
#[derive(Debug, Clone)]
pub struct TrainingStats {
    pub iteration_losses: Vec<LossBreakdown>,
    pub empty_part_skips: usize,
}

impl TrainingStats {
    pub fn mean_loss(&self) -> LossBreakdown {
        let n = self.iteration_losses.len().max(1) as f64;
        let mut out = LossBreakdown::default();
        for l in &self.iteration_losses {
            out.total += l.total / n;
            out.scc += l.scc / n;
            out.memory += l.memory / n;
            out.id += l.id / n;
        }
        out
    }
}

/// Identity-balanced batch of sample indices: `ids_per_batch` clusters
/// drawn without replacement, then members drawn with replacement
/// round-robin until `batch_size` is reached.
fn sample_batch(
    labels: &PseudoLabels,
    config: &PipelineConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let num_clusters = labels.num_clusters();
    let mut cluster_ids: Vec<usize> = (0..num_clusters).collect();
    // Partial Fisher-Yates for the cluster draw.
    let take = config.ids_per_batch.min(num_clusters);
    for i in 0..take {
        let j = rng.gen_range(i..cluster_ids.len());
        cluster_ids.swap(i, j);
    }
    let chosen = &cluster_ids[..take];
    let members: Vec<Vec<usize>> = chosen.iter().map(|&c| labels.members_of(c)).collect();
    let mut batch = Vec::with_capacity(config.batch_size);
    let mut slot = 0usize;
    while batch.len() < config.batch_size {
        let m = &members[slot % members.len()];
        batch.push(m[rng.gen_range(0..m.len())]);
        slot += 1;
    }
    batch
}

/// The weight enters the loss only as an additive -ln(w), so flooring it
/// leaves every gradient untouched; without the floor a sample whose
/// difficulty is exactly 0 or 1 would make its loss term infinite.
const LOSS_WEIGHT_FLOOR: f64 = 1e-12;

/// Loss-side sample weights: the weighted strategy uses the batch-
/// normalized difficulty weights; the ablation strategies train with
/// plain cluster-contrast (weight 1).
fn loss_weights(
    strategy: UpdateStrategy,
    batch_alphas: &[DifficultyScores],
    num_parts: usize,
) -> Result<BatchWeights> {
    match strategy {
        UpdateStrategy::Weighted => {
            let mut weights = batch_weights(batch_alphas)?;
            for w in weights.global.iter_mut() {
                *w = w.max(LOSS_WEIGHT_FLOOR);
            }
            for row in weights.parts.iter_mut() {
                for w in row.iter_mut() {
                    *w = w.max(LOSS_WEIGHT_FLOOR);
                }
            }
            Ok(weights)
        }
        _ => Ok(BatchWeights {
            global: vec![1.0; batch_alphas.len()],
            parts: vec![vec![1.0; num_parts]; batch_alphas.len()],
        }),
    }
}

fn update_weights(
    strategy: UpdateStrategy,
    bank: &MemoryBank,
    batch: &[MemorySample],
    batch_alphas: &[DifficultyScores],
) -> Result<BatchWeights> {
    match strategy {
        UpdateStrategy::Weighted => batch_weights(batch_alphas),
        UpdateStrategy::Average => Ok(average_update_weights(batch, bank.num_parts())),
        UpdateStrategy::Hardest => Ok(hardest_update_weights(bank, batch)),
    }
}

struct HeadGradAccumulator {
    weight: Tensor,
    bias: Vec<f64>,
}

impl HeadGradAccumulator {
    fn zeros(head: &LinearHeadParams) -> Self {
        Self {
            weight: Tensor::zeros(head.weight.dims()),
            bias: vec![0.0; head.bias.len()],
        }
    }

    fn apply(&self, head: &mut LinearHeadParams, learning_rate: f64, inv_batch: f64) {
        for (w, g) in head
            .weight
            .data_mut()
            .iter_mut()
            .zip(self.weight.data())
        {
            *w -= learning_rate * g * inv_batch;
        }
        for (b, g) in head.bias.iter_mut().zip(&self.bias) {
            *b -= learning_rate * g * inv_batch;
        }
    }
}

/// Training stage of one epoch.
///
/// Difficulty scores are computed once, up front, on the features the
/// clustering stage froze; batches then use them for loss weighting,
/// label refinement, and memory update weights. Each iteration runs
/// forward, accumulates gradients of the summed objective, applies one
/// SGD step, and then writes the batch features into the memory.
pub fn training_stage(
    dataset: &SyntheticDataset,
    labels: &PseudoLabels,
    masks: &[SoftMask],
    bank: &mut MemoryBank,
    params: &mut ModelParams,
    config: &PipelineConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainingStats> {
    let strategy = config.strategy()?;
    let caches = extract_all(params, dataset)?;
    let alphas = dataset_difficulty(&caches, config.difficulty_k)?;
    drop(caches);

    let num_clusters = bank.num_clusters();
    params.heads = Some(HeadSet::zeros(
        num_clusters,
        config.feature_dim,
        config.parts,
    ));

    let mut stats = TrainingStats {
        iteration_losses: Vec::with_capacity(config.iters_per_epoch),
        empty_part_skips: 0,
    };

    for _ in 0..config.iters_per_epoch {
        let batch_indices = sample_batch(labels, config, rng);
        let batch_size = batch_indices.len();
        let inv_batch = 1.0 / batch_size as f64;

        // Forward the batch.
        let batch_caches: Vec<ForwardCache> = batch_indices
            .iter()
            .map(|&i| forward_sample(params, &dataset.samples[i].input))
            .collect::<Result<_>>()?;
        let batch_alphas: Vec<DifficultyScores> =
            batch_indices.iter().map(|&i| alphas[i].clone()).collect();
        let w_loss = loss_weights(strategy, &batch_alphas, config.parts)?;

        let heads = params.heads.clone().expect("heads installed above");
        let mut trunk_grads = TrunkGrads::zeros_like(params);
        let mut head_global_grads = HeadGradAccumulator::zeros(&heads.global);
        let mut head_part_grads: Vec<HeadGradAccumulator> = heads
            .parts
            .iter()
            .map(HeadGradAccumulator::zeros)
            .collect();
        let mut losses = LossBreakdown::default();

        for (pos, (&sample_idx, cache)) in
            batch_indices.iter().zip(&batch_caches).enumerate()
        {
            let label = labels.labels[sample_idx];
            debug_assert_ne!(label, OUTLIER);
            let label = label as usize;

            // Parsing supervision.
            let (scc, grad_masks) = scc_loss(&masks[sample_idx], &cache.masks)?;

            // Memory loss on normalized features.
            let part_refs: Vec<Option<&[f64]>> =
                cache.parts.iter().map(|p| p.as_deref()).collect();
            let sample_features = SampleFeatures {
                global: &cache.global,
                parts: part_refs.clone(),
            };
            let (memory, feature_grads, skipped) = weighted_memory_loss(
                &sample_features,
                bank,
                label,
                w_loss.global[pos],
                &w_loss.parts[pos],
                config.temperature,
            )?;
            stats.empty_part_skips += skipped;

            // Classification with refined labels.
            let mut one_hot = vec![0.0; num_clusters];
            one_hot[label] = 1.0;
            let q_global = head_forward(&heads.global, &cache.global)?;
            let mut q_parts: Vec<Option<Vec<f64>>> = vec![None; config.parts];
            for k in 0..config.parts {
                if let Some(f) = &cache.parts[k] {
                    q_parts[k] = Some(head_forward(&heads.parts[k], f)?);
                }
            }
            let y_parts: Vec<Vec<f64>> = (0..config.parts)
                .map(|k| refine_part_label(&one_hot, batch_alphas[pos].parts[k]))
                .collect::<Result<_>>()?;
            let agreement = part_agreement_weights(&batch_alphas[pos].parts)?;
            let q_part_refs: Vec<Option<&[f64]>> =
                q_parts.iter().map(|q| q.as_deref()).collect();
            let y_global = distill_global_label(
                &one_hot,
                config.distill_beta,
                &agreement,
                &q_part_refs,
            )?;
            let (id, grad_logits_global, grad_logits_parts) =
                id_loss(&q_global, &q_part_refs, &y_global, &y_parts)?;

            losses.scc += scc * inv_batch;
            losses.memory += memory * inv_batch;
            losses.id += id * inv_batch;
            losses.total += (scc + memory + id) * inv_batch;

            // Head backward; feature gradients join the memory-loss ones.
            let mut grad_global = feature_grads.global;
            let mut grad_parts = feature_grads.parts;
            let head_grads =
                head_backward_from_logits(&heads.global, &cache.global, &grad_logits_global)?;
            head_global_grads.weight_add(&head_grads.weight);
            head_global_grads.bias_add(&head_grads.bias);
            for (g, h) in grad_global.iter_mut().zip(&head_grads.feature) {
                *g += h;
            }
            for k in 0..config.parts {
                let (Some(grad_logits), Some(f)) = (&grad_logits_parts[k], &cache.parts[k])
                else {
                    continue;
                };
                let hg = head_backward_from_logits(&heads.parts[k], f, grad_logits)?;
                head_part_grads[k].weight_add(&hg.weight);
                head_part_grads[k].bias_add(&hg.bias);
                match &mut grad_parts[k] {
                    Some(g) => {
                        for (gi, hi) in g.iter_mut().zip(&hg.feature) {
                            *gi += hi;
                        }
                    }
                    slot @ None => *slot = Some(hg.feature),
                }
            }

            // Trunk backward for this sample.
            let sample_grads = backward_sample(
                params,
                &dataset.samples[sample_idx].input,
                cache,
                Some(&grad_masks),
                Some(&grad_global),
                &grad_parts,
            )?;
            trunk_grads.accumulate(&sample_grads);
        }

        // SGD step, batch-mean gradients.
        trunk_grads.scale(inv_batch);
        apply_sgd(params, &trunk_grads, config.learning_rate);
        {
            let heads_mut = params.heads.as_mut().expect("heads installed above");
            head_global_grads.apply(&mut heads_mut.global, config.learning_rate, inv_batch);
            for (k, acc) in head_part_grads.iter().enumerate() {
                acc.apply(&mut heads_mut.parts[k], config.learning_rate, inv_batch);
            }
        }

        // Memory update with the forward (pre-step) features.
        let memory_batch: Vec<MemorySample> = batch_indices
            .iter()
            .zip(&batch_caches)
            .map(|(&i, cache)| MemorySample {
                label: labels.labels[i] as usize,
                global: cache.global.clone(),
                parts: cache.parts.clone(),
            })
            .collect();
        let w_update = update_weights(strategy, bank, &memory_batch, &batch_alphas)?;
        stats.empty_part_skips += bank.update(&memory_batch, &w_update)?;

        stats.iteration_losses.push(losses);
    }

    Ok(stats)
}

impl HeadGradAccumulator {
    fn weight_add(&mut self, other: &Tensor) {
        for (d, s) in self.weight.data_mut().iter_mut().zip(other.data()) {
            *d += s;
        }
    }

    fn bias_add(&mut self, other: &[f64]) {
        for (d, s) in self.bias.iter_mut().zip(other) {
            *d += s;
        }
    }
}

fn apply_sgd(params: &mut ModelParams, grads: &TrunkGrads, learning_rate: f64) {
    for (w, g) in params
        .extractor
        .weight
        .data_mut()
        .iter_mut()
        .zip(grads.extractor_weight.data())
    {
        *w -= learning_rate * g;
    }
    for (b, g) in params.extractor.bias.iter_mut().zip(&grads.extractor_bias) {
        *b -= learning_rate * g;
    }
    for (w, g) in params
        .classifier
        .kernel
        .data_mut()
        .iter_mut()
        .zip(grads.classifier_kernel.data())
    {
        *w -= learning_rate * g;
    }
    for (b, g) in params.classifier.bias.iter_mut().zip(&grads.classifier_bias) {
        *b -= learning_rate * g;
    }
}
