//! Foreground correction: a three-way split of the feature map into
//! salient foreground, regular foreground, and background by per-pixel
//! feature magnitude. Clustering the salient responses separately keeps
//! them from dragging the foreground mean up and pushing regular
//! foreground pixels into the background class.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// Pixel coordinates (row, col).
pub type Pixel = (usize, usize);

/// Three-way partition of the spatial grid by feature-vector magnitude.
///
/// The three sets partition the H x W grid, and their mean norms are
/// ordered salient >= regular >= background (empty sets excepted).
#[derive(Debug, Clone)]
pub struct ForegroundSplit {
    pub salient: Vec<Pixel>,
    pub regular: Vec<Pixel>,
    pub background: Vec<Pixel>,
}

impl ForegroundSplit {
    /// Salient and regular pixels in (row, col) order.
    pub fn foreground(&self) -> Vec<Pixel> {
        let mut fg: Vec<Pixel> = self
            .salient
            .iter()
            .chain(self.regular.iter())
            .cloned()
            .collect();
        fg.sort_unstable();
        fg
    }
}

/// Per-pixel Euclidean norms of the channel vectors, in row-major order.
pub fn pixel_norms(feature_map: &Tensor) -> Result<Vec<f64>> {
    let dims = feature_map.dims();
    if dims.len() != 3 {
        return Err(Error::ShapeMismatch {
            context: "pixel_norms",
            expected: vec![3],
            actual: vec![dims.len()],
        });
    }
    let (channels, h, w) = (dims[0], dims[1], dims[2]);
    let mut norms = vec![0.0; h * w];
    for c in 0..channels {
        let plane = feature_map.plane(c);
        for (acc, v) in norms.iter_mut().zip(plane) {
            *acc += v * v;
        }
    }
    for acc in norms.iter_mut() {
        *acc = acc.sqrt();
    }
    Ok(norms)
}

/// Outcome of the scalar 3-means: per-value cluster index (0 = lowest
/// center) plus the final centers.
#[derive(Debug, Clone)]
pub struct Scalar3Means {
    pub assignment: Vec<usize>,
    pub centers: [f64; 3],
}

/// Exact 1-D k-means with k = 3.
///
/// Optimal 1-D k-means clusters are contiguous runs of the sorted values,
/// so the global optimum is found by scanning all two-cut partitions of
/// the sorted sequence with prefix sums (O(n^2)). Ties are broken toward
/// the lexicographically smallest cut pair, making the result a pure
/// function of the input. Lloyd iterations were tried first and regularly
/// stall in suboptimal fixed points, which breaks the SSE-oracle contract
/// this function is tested against.
pub fn scalar_three_means(values: &[f64]) -> Result<Scalar3Means> {
    let n = values.len();
    if n < 3 {
        return Err(Error::EmptyInput("scalar_three_means needs >= 3 values"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();

    let mut prefix = vec![0.0; n + 1];
    let mut prefix_sq = vec![0.0; n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
        prefix_sq[i + 1] = prefix_sq[i] + v * v;
    }
    // Within-segment SSE of sorted[lo..hi].
    let seg_cost = |lo: usize, hi: usize| -> f64 {
        let count = (hi - lo) as f64;
        let sum = prefix[hi] - prefix[lo];
        let sum_sq = prefix_sq[hi] - prefix_sq[lo];
        (sum_sq - sum * sum / count).max(0.0)
    };

    let mut best = (f64::INFINITY, 1usize, 2usize);
    for i in 1..n - 1 {
        let head = seg_cost(0, i);
        if head >= best.0 {
            continue;
        }
        for j in i + 1..n {
            let sse = head + seg_cost(i, j) + seg_cost(j, n);
            if sse < best.0 {
                best = (sse, i, j);
            }
        }
    }
    let (_, cut1, cut2) = best;

    let mut assignment = vec![0usize; n];
    for (pos, &original) in order.iter().enumerate() {
        assignment[original] = if pos < cut1 {
            0
        } else if pos < cut2 {
            1
        } else {
            2
        };
    }
    let centers = [
        (prefix[cut1] - prefix[0]) / cut1 as f64,
        (prefix[cut2] - prefix[cut1]) / (cut2 - cut1) as f64,
        (prefix[n] - prefix[cut2]) / (n - cut2) as f64,
    ];
    Ok(Scalar3Means {
        assignment,
        centers,
    })
}

/// Split a feature map into salient / regular / background pixels.
///
/// With fewer than three distinct norm values the k-means is degenerate
/// and a quantile fallback applies: pixels are ordered by descending norm
/// (ties by pixel index) and cut at the tertiles, which keeps the
/// mean-norm ordering intact on constant and two-level maps.
pub fn foreground_split(feature_map: &Tensor) -> Result<ForegroundSplit> {
    let dims = feature_map.dims();
    let (h, w) = (dims[1], dims[2]);
    if h * w < 3 {
        return Err(Error::EmptyInput("foreground_split needs >= 3 pixels"));
    }
    let norms = pixel_norms(feature_map)?;
    split_norms(&norms, h, w)
}

/// Split precomputed per-pixel norms; exposed for the split oracle tests.
pub fn split_norms(norms: &[f64], h: usize, w: usize) -> Result<ForegroundSplit> {
    debug_assert_eq!(norms.len(), h * w);
    let mut distinct = norms.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();

    let class_of: Vec<usize> = if distinct.len() < 3 {
        quantile_fallback(norms)
    } else {
        let km = scalar_three_means(norms)?;
        // Rank cluster indices by center value so class 2 is the largest.
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| km.centers[a].partial_cmp(&km.centers[b]).unwrap());
        let mut rank = [0usize; 3];
        for (r, &k) in order.iter().enumerate() {
            rank[k] = r;
        }
        km.assignment.iter().map(|&a| rank[a]).collect()
    };

    let mut split = ForegroundSplit {
        salient: Vec::new(),
        regular: Vec::new(),
        background: Vec::new(),
    };
    for (idx, &class) in class_of.iter().enumerate() {
        let pixel = (idx / w, idx % w);
        match class {
            2 => split.salient.push(pixel),
            1 => split.regular.push(pixel),
            _ => split.background.push(pixel),
        }
    }
    Ok(split)
}

/// Tertile split on (norm desc, pixel index asc) order; returns class per
/// pixel with 2 = salient, 1 = regular, 0 = background.
fn quantile_fallback(norms: &[f64]) -> Vec<usize> {
    let n = norms.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        norms[b]
            .partial_cmp(&norms[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let first_cut = n / 3;
    let second_cut = 2 * n / 3;
    let mut class_of = vec![0usize; n];
    for (pos, &idx) in order.iter().enumerate() {
        class_of[idx] = if pos < first_cut {
            2
        } else if pos < second_cut {
            1
        } else {
            0
        };
    }
    class_of
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_norm(pixels: &[Pixel], norms: &[f64], w: usize) -> f64 {
        if pixels.is_empty() {
            return f64::NAN;
        }
        pixels.iter().map(|&(r, c)| norms[r * w + c]).sum::<f64>() / pixels.len() as f64
    }

    #[test]
    fn splits_three_level_norms() {
        // One row of six pixels with clearly separated levels.
        let norms = vec![10.0, 9.8, 3.0, 3.1, 0.1, 0.2];
        let split = split_norms(&norms, 1, 6).unwrap();
        assert_eq!(split.salient, vec![(0, 0), (0, 1)]);
        assert_eq!(split.regular, vec![(0, 2), (0, 3)]);
        assert_eq!(split.background, vec![(0, 4), (0, 5)]);
    }

    #[test]
    fn constant_norms_use_fallback_without_crash() {
        let norms = vec![2.5; 6];
        let split = split_norms(&norms, 2, 3).unwrap();
        assert_eq!(split.salient.len(), 2);
        assert_eq!(split.regular.len(), 2);
        assert_eq!(split.background.len(), 2);
        // Fallback orders by pixel index when all norms tie.
        assert_eq!(split.salient, vec![(0, 0), (0, 1)]);
    }

    #[test]
    fn two_level_norms_fallback_covers_high_values() {
        let norms = vec![5.0, 5.0, 5.0, 0.0, 0.0, 0.0];
        let split = split_norms(&norms, 1, 6).unwrap();
        let fg = split.foreground();
        for col in 0..3 {
            assert!(fg.contains(&(0, col)), "5-valued pixel missing from fg");
        }
        let sal = mean_norm(&split.salient, &norms, 6);
        let reg = mean_norm(&split.regular, &norms, 6);
        let bg = mean_norm(&split.background, &norms, 6);
        assert!(sal >= reg && reg >= bg);
    }

    #[test]
    fn partition_property_and_mean_ordering() {
        let mut r = crate::testutil::rng(101);
        for _ in 0..50 {
            let h = 4;
            let w = 5;
            let norms: Vec<f64> = (0..h * w)
                .map(|_| crate::testutil::unif(&mut r).abs() * 10.0)
                .collect();
            let split = split_norms(&norms, h, w).unwrap();
            let total = split.salient.len() + split.regular.len() + split.background.len();
            assert_eq!(total, h * w);
            let mut seen = vec![false; h * w];
            for &(row, col) in split
                .salient
                .iter()
                .chain(&split.regular)
                .chain(&split.background)
            {
                assert!(!seen[row * w + col], "pixel assigned twice");
                seen[row * w + col] = true;
            }
            let sal = mean_norm(&split.salient, &norms, w);
            let reg = mean_norm(&split.regular, &norms, w);
            let bg = mean_norm(&split.background, &norms, w);
            if !sal.is_nan() && !reg.is_nan() {
                assert!(sal >= reg - 1e-12);
            }
            if !reg.is_nan() && !bg.is_nan() {
                assert!(reg >= bg - 1e-12);
            }
        }
    }

    #[test]
    fn too_few_pixels_is_error() {
        let t = Tensor::from_vec(&[1, 1, 2], vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            foreground_split(&t).unwrap_err(),
            Error::EmptyInput(_)
        ));
    }
}
