//! Memory initialization from freshly clustered samples: per feature
//! space and per cluster, the centroid is the normalized mean of the
//! member features. Outliers contribute nothing.

use crate::error::{Error, Result};
use crate::id_clustering::dbscan::PseudoLabels;
use crate::numerics::vec_ops::{l2_normalize, mean_vector};
use crate::weighted_memory::bank::{MemoryBank, UpdateStrategy};

/// Per-sample features for every space: global plus l parts, with `None`
/// marking an empty part feature.
#[derive(Debug, Clone)]
pub struct SpaceFeatures {
    pub global: Vec<Vec<f64>>,
    /// Indexed [part][sample].
    pub parts: Vec<Vec<Option<Vec<f64>>>>,
}

/// Build the initial memory bank from cluster means.
pub fn init_memory(
    features: &SpaceFeatures,
    labels: &PseudoLabels,
    momentum: f64,
    temperature: f64,
    strategy: UpdateStrategy,
) -> Result<MemoryBank> {
    let num_clusters = labels.num_clusters();
    if num_clusters == 0 {
        return Err(Error::AllOutliers {
            num_samples: labels.labels.len(),
        });
    }
    if features.global.len() != labels.labels.len() {
        return Err(Error::ShapeMismatch {
            context: "init_memory features",
            expected: vec![labels.labels.len()],
            actual: vec![features.global.len()],
        });
    }

    let mut global = Vec::with_capacity(num_clusters);
    for cluster in 0..num_clusters {
        let members = labels.members_of(cluster);
        let rows: Vec<&[f64]> = members
            .iter()
            .map(|&i| features.global[i].as_slice())
            .collect();
        global.push(l2_normalize(&mean_vector(&rows)?)?);
    }

    let mut parts = Vec::with_capacity(features.parts.len());
    for (part, per_sample) in features.parts.iter().enumerate() {
        let mut centroids = Vec::with_capacity(num_clusters);
        for cluster in 0..num_clusters {
            let members = labels.members_of(cluster);
            let rows: Vec<&[f64]> = members
                .iter()
                .filter_map(|&i| per_sample[i].as_deref())
                .collect();
            if rows.is_empty() {
                return Err(Error::InvalidParameter {
                    name: "part features",
                    message: format!(
                        "cluster {cluster} has no usable features for part {part}"
                    ),
                });
            }
            centroids.push(l2_normalize(&mean_vector(&rows)?)?);
        }
        parts.push(centroids);
    }

    Ok(MemoryBank {
        momentum,
        temperature,
        strategy,
        global,
        parts,
    })
}
