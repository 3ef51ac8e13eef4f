//! The cluster-centroid memory: one table of unit-norm centroids for the
//! global feature space and one per part space, updated sample by sample
//! with a momentum rule and renormalized after every update.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::vec_ops::{l2_normalize_in_place, norm_l2};

/// How a batch writes into the memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateStrategy {
    /// Every sample updates with weight 1/B.
    Average,
    /// Per cluster in the batch, only the sample least similar to the
    /// current centroid updates, with weight 1.
    Hardest,
    /// Difficulty-derived weights, l1-normalized within the batch.
    Weighted,
}

impl FromStr for UpdateStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(Self::Average),
            "hardest" => Ok(Self::Hardest),
            "weighted" => Ok(Self::Weighted),
            other => Err(Error::Config(format!(
                "unknown update strategy {other:?}; expected average, hardest, or weighted"
            ))),
        }
    }
}

impl fmt::Display for UpdateStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::Average => "average",
            Self::Hardest => "hardest",
            Self::Weighted => "weighted",
        };
        f.write_str(name)
    }
}

/// One sample's contribution to a memory update.
#[derive(Debug, Clone)]
pub struct MemorySample {
    pub label: usize,
    pub global: Vec<f64>,
    /// One entry per part space; `None` marks an empty part feature that
    /// must be skipped.
    pub parts: Vec<Option<Vec<f64>>>,
}

/// Per-sample, per-space update weights for one batch.
#[derive(Debug, Clone)]
pub struct BatchWeights {
    pub global: Vec<f64>,
    /// Indexed [sample][part].
    pub parts: Vec<Vec<f64>>,
}

/// Cluster centroids for the global space plus every part space.
#[derive(Debug, Clone)]
pub struct MemoryBank {
    pub momentum: f64,
    pub temperature: f64,
    pub strategy: UpdateStrategy,
    /// N_C x D, unit rows.
    pub global: Vec<Vec<f64>>,
    /// Indexed [part][cluster], unit rows.
    pub parts: Vec<Vec<Vec<f64>>>,
}

impl MemoryBank {
    pub fn num_clusters(&self) -> usize {
        self.global.len()
    }

    pub fn num_parts(&self) -> usize {
        self.parts.len()
    }

    pub fn dim(&self) -> usize {
        self.global.first().map(|c| c.len()).unwrap_or(0)
    }

    /// Apply one batch in ascending sample order.
    ///
    /// Every accepted sample advances its own cluster's centroid as
    /// `c <- m*c + (1-m)*w*f`, renormalized immediately, so later samples
    /// in the batch see the centroids already moved by earlier ones.
    /// Entries with weight exactly 0 are skipped (the recursion would only
    /// shrink and renormalize, leaving the centroid where it was), and
    /// `m == 1` short-circuits to keep the identity contract exact.
    pub fn update(&mut self, batch: &[MemorySample], weights: &BatchWeights) -> Result<usize> {
        if weights.global.len() != batch.len() || weights.parts.len() != batch.len() {
            return Err(Error::ShapeMismatch {
                context: "memory update weights",
                expected: vec![batch.len()],
                actual: vec![weights.global.len(), weights.parts.len()],
            });
        }
        let m = self.momentum;
        if m == 1.0 {
            return Ok(0);
        }
        let mut skipped_parts = 0usize;
        for (idx, sample) in batch.iter().enumerate() {
            if sample.label >= self.num_clusters() {
                return Err(Error::UnknownLabel {
                    label: sample.label as i64,
                });
            }
            let w = weights.global[idx];
            if w != 0.0 {
                let centroid = &mut self.global[sample.label];
                for (c, f) in centroid.iter_mut().zip(&sample.global) {
                    *c = m * *c + (1.0 - m) * w * f;
                }
                renormalize(centroid)?;
            }
            for (part, feature) in sample.parts.iter().enumerate() {
                let Some(feature) = feature else {
                    skipped_parts += 1;
                    continue;
                };
                let w = weights.parts[idx][part];
                if w == 0.0 {
                    continue;
                }
                let centroid = &mut self.parts[part][sample.label];
                for (c, f) in centroid.iter_mut().zip(feature) {
                    *c = m * *c + (1.0 - m) * w * f;
                }
                renormalize(centroid)?;
            }
        }
        Ok(skipped_parts)
    }
}

fn renormalize(centroid: &mut [f64]) -> Result<()> {
    if norm_l2(centroid) == 0.0 {
        return Err(Error::ZeroVector("memory centroid after update"));
    }
    l2_normalize_in_place(centroid)
}

/// Update weights for the `average` strategy: 1/B everywhere.
pub fn average_update_weights(batch: &[MemorySample], num_parts: usize) -> BatchWeights {
    let b = batch.len().max(1);
    let w = 1.0 / b as f64;
    BatchWeights {
        global: vec![w; batch.len()],
        parts: vec![vec![w; num_parts]; batch.len()],
    }
}

/// Update weights for the `hardest` strategy: per cluster present in the
/// batch and per space, weight 1 on the sample with minimal similarity to
/// the current centroid (ties to the lowest batch index), 0 elsewhere.
pub fn hardest_update_weights(bank: &MemoryBank, batch: &[MemorySample]) -> BatchWeights {
    let num_parts = bank.num_parts();
    let mut weights = BatchWeights {
        global: vec![0.0; batch.len()],
        parts: vec![vec![0.0; num_parts]; batch.len()],
    };
    let mut clusters: Vec<usize> = batch.iter().map(|s| s.label).collect();
    clusters.sort_unstable();
    clusters.dedup();
    for &cluster in &clusters {
        // Global space.
        let mut hardest: Option<(f64, usize)> = None;
        for (idx, sample) in batch.iter().enumerate() {
            if sample.label != cluster {
                continue;
            }
            let sim = crate::numerics::vec_ops::dot(&sample.global, &bank.global[cluster]);
            if hardest.map_or(true, |(best, _)| sim < best) {
                hardest = Some((sim, idx));
            }
        }
        if let Some((_, idx)) = hardest {
            weights.global[idx] = 1.0;
        }
        // Each part space independently.
        for part in 0..num_parts {
            let mut hardest: Option<(f64, usize)> = None;
            for (idx, sample) in batch.iter().enumerate() {
                if sample.label != cluster {
                    continue;
                }
                let Some(feature) = &sample.parts[part] else {
                    continue;
                };
                let sim =
                    crate::numerics::vec_ops::dot(feature, &bank.parts[part][cluster]);
                if hardest.map_or(true, |(best, _)| sim < best) {
                    hardest = Some((sim, idx));
                }
            }
            if let Some((_, idx)) = hardest {
                weights.parts[idx][part] = 1.0;
            }
        }
    }
    weights
}
