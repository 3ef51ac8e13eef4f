//! Density clustering over a precomputed distance matrix.
//!
//! Follows the classic formulation: the eps-neighborhood of a point
//! includes the point itself and everything at distance <= eps; a point is
//! core when that neighborhood holds at least `min_samples` points.
//! Clusters are grown from core points in ascending index order, so the
//! labeling is a pure function of the matrix.

use crate::error::{Error, Result};
use crate::id_clustering::jaccard::DistanceMatrix;

/// Label marking samples that belong to no cluster.
pub const OUTLIER: i64 = -1;

/// Per-sample pseudo identity labels: contiguous cluster ids 0..N_C-1 or
/// [`OUTLIER`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PseudoLabels {
    pub labels: Vec<i64>,
}

impl PseudoLabels {
    /// Number of distinct clusters (outliers excluded).
    pub fn num_clusters(&self) -> usize {
        self.labels
            .iter()
            .filter(|&&l| l != OUTLIER)
            .map(|&l| l as usize + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn num_outliers(&self) -> usize {
        self.labels.iter().filter(|&&l| l == OUTLIER).count()
    }

    /// Sample indices of one cluster, ascending.
    pub fn members_of(&self, cluster: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == cluster as i64)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Standard DBSCAN over `distances`.
pub fn dbscan(distances: &DistanceMatrix, eps: f64, min_samples: usize) -> Result<PseudoLabels> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            message: format!("must be positive, got {eps}"),
        });
    }
    let n = distances.len();
    if n == 0 {
        return Err(Error::EmptyInput("dbscan distance matrix"));
    }

    let neighborhood = |i: usize| -> Vec<usize> {
        (0..n).filter(|&j| distances.get(i, j) <= eps).collect()
    };
    let is_core: Vec<bool> = (0..n).map(|i| neighborhood(i).len() >= min_samples).collect();

    let mut labels = vec![OUTLIER; n];
    let mut cluster = 0i64;
    for start in 0..n {
        if !is_core[start] || labels[start] != OUTLIER {
            continue;
        }
        labels[start] = cluster;
        let mut queue = vec![start];
        while let Some(p) = queue.pop() {
            for q in neighborhood(p) {
                if labels[q] == OUTLIER {
                    labels[q] = cluster;
                    if is_core[q] {
                        queue.push(q);
                    }
                }
            }
        }
        cluster += 1;
    }
    Ok(PseudoLabels { labels })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix_from(mut fill: impl FnMut(usize, usize) -> f64, n: usize) -> DistanceMatrix {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = if i == j { 0.0 } else { fill(i, j) };
            }
        }
        DistanceMatrix::from_rows(n, data).unwrap()
    }

    #[test]
    fn two_blobs_form_two_clusters() {
        let d = matrix_from(
            |i, j| if (i < 5) == (j < 5) { 0.1 } else { 0.9 },
            10,
        );
        let labels = dbscan(&d, 0.3, 3).unwrap();
        assert_eq!(labels.num_clusters(), 2);
        assert_eq!(labels.num_outliers(), 0);
        for i in 0..5 {
            assert_eq!(labels.labels[i], labels.labels[0]);
            assert_eq!(labels.labels[i + 5], labels.labels[5]);
        }
        assert_ne!(labels.labels[0], labels.labels[5]);
    }

    #[test]
    fn isolated_point_is_outlier() {
        // Sample 5 far from a tight blob of five.
        let d = matrix_from(|i, j| if i < 5 && j < 5 { 0.1 } else { 0.9 }, 6);
        let labels = dbscan(&d, 0.3, 3).unwrap();
        assert_eq!(labels.labels[5], OUTLIER);
        assert_eq!(labels.num_clusters(), 1);
    }

    #[test]
    fn huge_eps_gives_single_cluster() {
        let mut r = crate::testutil::rng(8);
        let d = matrix_from(|_, _| 0.5 + 0.4 * crate::testutil::unif(&mut r).abs(), 7);
        // Symmetrize.
        let mut data = vec![0.0; 49];
        for i in 0..7 {
            for j in 0..7 {
                let v = if i < j { d.get(i, j) } else { d.get(j, i) };
                data[i * 7 + j] = if i == j { 0.0 } else { v };
            }
        }
        let d = DistanceMatrix::from_rows(7, data).unwrap();
        let labels = dbscan(&d, 2.0, 3).unwrap();
        assert_eq!(labels.num_clusters(), 1);
        assert_eq!(labels.num_outliers(), 0);
    }

    #[test]
    fn labels_are_contiguous_from_zero() {
        let d = matrix_from(
            |i, j| {
                let bi = i / 3;
                let bj = j / 3;
                if bi == bj {
                    0.05
                } else {
                    0.95
                }
            },
            9,
        );
        let labels = dbscan(&d, 0.2, 2).unwrap();
        assert_eq!(labels.num_clusters(), 3);
        let mut seen: Vec<i64> = labels.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen, vec![0, 1, 2]);
    }

    #[test]
    fn permutation_invariant_up_to_relabel() {
        let base = matrix_from(
            |i, j| if (i < 4) == (j < 4) { 0.1 } else { 0.8 },
            8,
        );
        let labels = dbscan(&base, 0.3, 3).unwrap();

        let perm = [5usize, 2, 7, 0, 4, 1, 6, 3];
        let mut data = vec![0.0; 64];
        for i in 0..8 {
            for j in 0..8 {
                data[i * 8 + j] = base.get(perm[i], perm[j]);
            }
        }
        let permuted = DistanceMatrix::from_rows(8, data).unwrap();
        let permuted_labels = dbscan(&permuted, 0.3, 3).unwrap();

        // Same partition: co-membership must agree through the permutation.
        for i in 0..8 {
            for j in 0..8 {
                let together_base = labels.labels[perm[i]] == labels.labels[perm[j]]
                    && labels.labels[perm[i]] != OUTLIER;
                let together_perm = permuted_labels.labels[i] == permuted_labels.labels[j]
                    && permuted_labels.labels[i] != OUTLIER;
                assert_eq!(together_base, together_perm);
            }
        }
    }

    #[test]
    fn non_positive_eps_is_error() {
        let d = matrix_from(|_, _| 0.5, 3);
        assert!(dbscan(&d, 0.0, 2).is_err());
    }
}
