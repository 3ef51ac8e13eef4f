//! Space correction: the pairwise feature-distance matrix over foreground
//! pixels, with entries censored to a sentinel wherever the two pixels are
//! spatially too far apart to belong to the same body part.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;
use crate::scc::foreground::Pixel;

/// Marker for censored pairs. Kept as an exact finite constant so matrix
/// entries can be compared with `==` and serialized losslessly.
pub const INF_SENTINEL: f64 = 1e30;

/// Symmetric n x n matrix of feature distances with censored entries.
#[derive(Debug, Clone)]
pub struct CensoredDistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CensoredDistanceMatrix {
    /// Wrap a precomputed matrix, checking symmetry, zero diagonal, and
    /// that every entry is either a nonnegative finite distance or the
    /// exact sentinel.
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::ShapeMismatch {
                context: "censored distance matrix",
                expected: vec![n * n],
                actual: vec![entries.len()],
            });
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::InvalidParameter {
                    name: "distance matrix",
                    message: format!("nonzero diagonal at {i}"),
                });
            }
            for j in 0..n {
                let v = entries[i * n + j];
                if !(v >= 0.0) || (!v.is_finite() && v != INF_SENTINEL) {
                    return Err(Error::NonFinite("censored distance entry"));
                }
                if entries[i * n + j] != entries[j * n + i] {
                    return Err(Error::InvalidParameter {
                        name: "distance matrix",
                        message: format!("asymmetric at ({i},{j})"),
                    });
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn is_censored(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == INF_SENTINEL
    }
}

/// Build the corrected distance matrix for the given foreground pixels.
///
/// Feature distance is Euclidean over the per-pixel channel vectors of
/// `feature_map`; spatial distance is Euclidean over integer (row, col).
/// Pairs with spatial distance >= `eta` get the sentinel.
pub fn censored_distance(
    feature_map: &Tensor,
    foreground: &[Pixel],
    eta: f64,
) -> Result<CensoredDistanceMatrix> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter {
            name: "eta",
            message: format!("must be positive, got {eta}"),
        });
    }
    if foreground.is_empty() {
        return Err(Error::EmptyInput("censored_distance foreground"));
    }
    let dims = feature_map.dims();
    let (channels, h, w) = (dims[0], dims[1], dims[2]);
    for &(r, c) in foreground {
        if r >= h || c >= w {
            return Err(Error::UncoveredPixel { row: r, col: c });
        }
    }
    let n = foreground.len();
    let eta_sq = eta * eta;

    // Gather per-pixel channel vectors once.
    let mut vectors = vec![vec![0.0f64; channels]; n];
    for (idx, &(r, c)) in foreground.iter().enumerate() {
        for ch in 0..channels {
            vectors[idx][ch] = feature_map.get3(ch, r, c);
        }
    }

    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (ri, ci) = foreground[i];
            let (rj, cj) = foreground[j];
            let dr = ri as f64 - rj as f64;
            let dc = ci as f64 - cj as f64;
            let spatial_sq = dr * dr + dc * dc;
            let v = if spatial_sq >= eta_sq {
                INF_SENTINEL
            } else {
                vectors[i]
                    .iter()
                    .zip(&vectors[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            };
            entries[i * n + j] = v;
            entries[j * n + i] = v;
        }
    }
    CensoredDistanceMatrix::from_entries(n, entries)
}
