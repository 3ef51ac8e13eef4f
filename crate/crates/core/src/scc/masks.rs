//! Pseudo parsing mask assembly and cross-epoch smoothing.

use crate::error::{Error, Result};
use crate::numerics::tensor::{HardMask, SoftMask, Tensor};
use crate::scc::foreground::{ForegroundSplit, Pixel};

/// Assemble a one-hot l x H x W mask from the foreground split and the
/// per-foreground-pixel cluster assignment.
///
/// Foreground channels are ordered by the mean row coordinate of their
/// cluster members, topmost cluster first, so channel indices carry the
/// same head-to-feet meaning across samples and epochs. The last channel
/// is the background.
pub fn build_masks(
    split: &ForegroundSplit,
    foreground: &[Pixel],
    assignment: &[usize],
    h: usize,
    w: usize,
    parts: usize,
) -> Result<HardMask> {
    if parts < 2 {
        return Err(Error::InvalidParameter {
            name: "parts",
            message: format!("need at least 2 channels, got {parts}"),
        });
    }
    if assignment.len() != foreground.len() {
        return Err(Error::ShapeMismatch {
            context: "build_masks assignment",
            expected: vec![foreground.len()],
            actual: vec![assignment.len()],
        });
    }
    let num_clusters = assignment.iter().map(|&a| a + 1).max().unwrap_or(0);
    if num_clusters > parts - 1 {
        return Err(Error::InvalidParameter {
            name: "assignment",
            message: format!(
                "{num_clusters} clusters exceed {} foreground channels",
                parts - 1
            ),
        });
    }

    // Mean row per cluster, then channel order by ascending mean row
    // (descending height), ties by cluster id.
    let mut row_sum = vec![0.0f64; num_clusters];
    let mut count = vec![0usize; num_clusters];
    for (&(r, _), &a) in foreground.iter().zip(assignment) {
        row_sum[a] += r as f64;
        count[a] += 1;
    }
    let mut order: Vec<usize> = (0..num_clusters).collect();
    order.sort_by(|&a, &b| {
        let ra = row_sum[a] / count[a].max(1) as f64;
        let rb = row_sum[b] / count[b].max(1) as f64;
        ra.partial_cmp(&rb).unwrap().then(a.cmp(&b))
    });
    let mut channel_of = vec![0usize; num_clusters];
    for (channel, &cluster) in order.iter().enumerate() {
        channel_of[cluster] = channel;
    }

    let mut mask = Tensor::zeros(&[parts, h, w]);
    let mut covered = vec![false; h * w];
    for (&(r, c), &a) in foreground.iter().zip(assignment) {
        if r >= h || c >= w {
            return Err(Error::UncoveredPixel { row: r, col: c });
        }
        mask.set3(channel_of[a], r, c, 1.0);
        covered[r * w + c] = true;
    }
    for &(r, c) in &split.background {
        if r >= h || c >= w {
            return Err(Error::UncoveredPixel { row: r, col: c });
        }
        mask.set3(parts - 1, r, c, 1.0);
        covered[r * w + c] = true;
    }
    if let Some(missing) = covered.iter().position(|&seen| !seen) {
        return Err(Error::UncoveredPixel {
            row: missing / w,
            col: missing % w,
        });
    }
    Ok(mask)
}

/// Momentum smoothing of pseudo parsing masks across epochs:
/// `out = gamma * prev + (1 - gamma) * current`.
///
/// A convex combination of per-pixel simplex masks stays on the simplex.
pub fn smooth_masks(prev: &SoftMask, current: &HardMask, gamma: f64) -> Result<SoftMask> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            message: format!("must be in [0, 1], got {gamma}"),
        });
    }
    current.expect_dims(prev.dims(), "smooth_masks current")?;
    let data = prev
        .data()
        .iter()
        .zip(current.data())
        .map(|(p, c)| gamma * p + (1.0 - gamma) * c)
        .collect();
    Tensor::from_vec(prev.dims(), data)
}
