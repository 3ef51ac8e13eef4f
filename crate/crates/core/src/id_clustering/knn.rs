//! Exact k-nearest-neighbor lists over unit-norm features by cosine
//! similarity. Desk scale keeps N in the hundreds, so the O(N^2) scan is
//! the whole story — no index structures.

use crate::error::{Error, Result};

/// Per-sample ordered neighbor lists (self excluded).
#[derive(Debug, Clone)]
pub struct NeighborSets {
    pub neighbors: Vec<Vec<usize>>,
}

impl NeighborSets {
    pub fn row(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

/// K nearest neighbors of every sample by descending dot product, ties
/// broken by ascending sample index. Lists are `min(k, N-1)` long.
pub fn nearest_neighbors(features: &[Vec<f64>], k: usize) -> Result<NeighborSets> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            message: "must be positive".into(),
        });
    }
    let n = features.len();
    if n < 2 {
        return Err(Error::EmptyInput("nearest_neighbors needs >= 2 samples"));
    }
    let dim = features[0].len();
    for f in features {
        if f.len() != dim {
            return Err(Error::ShapeMismatch {
                context: "nearest_neighbors features",
                expected: vec![dim],
                actual: vec![f.len()],
            });
        }
    }
    let take = k.min(n - 1);
    let mut neighbors = Vec::with_capacity(n);
    for i in 0..n {
        let mut scored: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                (
                    crate::numerics::vec_ops::dot(&features[i], &features[j]),
                    j,
                )
            })
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        neighbors.push(scored.into_iter().take(take).map(|(_, j)| j).collect());
    }
    Ok(NeighborSets { neighbors })
}
