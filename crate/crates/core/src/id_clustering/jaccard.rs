//! Jaccard distances over k-reciprocal neighbor sets.
//!
//! Two samples are k-reciprocal neighbors when each appears in the other's
//! kNN list; that mutual requirement prunes one-sided matches before the
//! set overlap is measured. This is the hard set-membership variant: no
//! Gaussian soft encoding, and `k2` (local query expansion) is accepted
//! but reserved — it is validated and otherwise unused.

use crate::error::{Error, Result};
use crate::id_clustering::knn::nearest_neighbors;

/// Symmetric distance matrix with entries in [0, 1], zero diagonal.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_rows(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::ShapeMismatch {
                context: "distance matrix",
                expected: vec![n * n],
                actual: vec![data.len()],
            });
        }
        Ok(Self { n, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }
}

/// Sorted k-reciprocal set of every sample at neighborhood size `k`:
/// `R(i, k) = { j : j in kNN(i, k) and i in kNN(j, k) }`.
fn reciprocal_sets(features: &[Vec<f64>], k: usize) -> Result<Vec<Vec<usize>>> {
    let sets = nearest_neighbors(features, k)?;
    let n = sets.len();
    let mut member = vec![vec![false; n]; n];
    for (i, row) in sets.neighbors.iter().enumerate() {
        for &j in row {
            member[i][j] = true;
        }
    }
    let mut reciprocal = Vec::with_capacity(n);
    for i in 0..n {
        let r: Vec<usize> = (0..n)
            .filter(|&j| member[i][j] && member[j][i])
            .collect();
        reciprocal.push(r);
    }
    Ok(reciprocal)
}

fn intersection_size(a: &[usize], b: &[usize]) -> usize {
    // Both inputs sorted ascending.
    let mut count = 0;
    let mut ia = 0;
    let mut ib = 0;
    while ia < a.len() && ib < b.len() {
        match a[ia].cmp(&b[ib]) {
            std::cmp::Ordering::Less => ia += 1,
            std::cmp::Ordering::Greater => ib += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                ia += 1;
                ib += 1;
            }
        }
    }
    count
}

fn union_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut ia = 0;
    let mut ib = 0;
    while ia < a.len() || ib < b.len() {
        match (a.get(ia), b.get(ib)) {
            (Some(&x), Some(&y)) if x == y => {
                out.push(x);
                ia += 1;
                ib += 1;
            }
            (Some(&x), Some(&y)) if x < y => {
                out.push(x);
                ia += 1;
            }
            (Some(_), Some(&y)) => {
                out.push(y);
                ib += 1;
            }
            (Some(&x), None) => {
                out.push(x);
                ia += 1;
            }
            (None, Some(&y)) => {
                out.push(y);
                ib += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

/// Jaccard distance matrix over expanded k-reciprocal sets.
///
/// Each sample's set `R(i, k1)` is expanded with `R(j, k1/2)` for every
/// member `j` whose half-size set overlaps `R(i, k1)` in at least two
/// thirds of its elements. Distance is `1 - |Ri n Rj| / |Ri u Rj|`; two
/// samples with empty expanded sets are maximally distant.
pub fn k_reciprocal_jaccard(features: &[Vec<f64>], k1: usize, k2: usize) -> Result<DistanceMatrix> {
    if k1 < 2 {
        return Err(Error::InvalidParameter {
            name: "k1",
            message: format!("must be >= 2, got {k1}"),
        });
    }
    // k2 is reserved for local query expansion, which the hard-set variant
    // does not define; it only gets validated here.
    let _ = k2;
    let n = features.len();
    let base = reciprocal_sets(features, k1)?;
    let half = reciprocal_sets(features, (k1 / 2).max(1))?;

    let mut expanded = Vec::with_capacity(n);
    for i in 0..n {
        let mut set = base[i].clone();
        for &j in &base[i] {
            let overlap = intersection_size(&base[i], &half[j]);
            if 3 * overlap >= 2 * half[j].len() && !half[j].is_empty() {
                set = union_sorted(&set, &half[j]);
            }
        }
        expanded.push(set);
    }

    let mut matrix = DistanceMatrix::from_rows(n, vec![0.0; n * n])?;
    for i in 0..n {
        for j in (i + 1)..n {
            let inter = intersection_size(&expanded[i], &expanded[j]);
            let union = expanded[i].len() + expanded[j].len() - inter;
            let d = if union == 0 {
                1.0
            } else {
                1.0 - inter as f64 / union as f64
            };
            matrix.set(i, j, d);
            matrix.set(j, i, d);
        }
    }
    Ok(matrix)
}
