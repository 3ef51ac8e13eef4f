//! Average-linkage agglomerative clustering over a censored distance
//! matrix. Censored pairs never enter a linkage average; a merge whose
//! cross-pairs are all censored is forbidden outright, which is what keeps
//! spatially distant look-alike regions in separate part clusters.

use crate::error::{Error, Result};
use crate::scc::distance::CensoredDistanceMatrix;
use crate::scc::foreground::Pixel;

/// Result of [`agglomerate`].
#[derive(Debug, Clone)]
pub struct Agglomeration {
    /// Cluster id per input point, contiguous 0..k-1, ordered by smallest
    /// member index.
    pub assignment: Vec<usize>,
    /// Number of clusters when merging stopped, before any spatial
    /// reattachment.
    pub clusters_before_fallback: usize,
    /// True when the requested count was unreachable and the smallest
    /// clusters were reattached spatially.
    pub fallback_applied: bool,
}

struct Cluster {
    members: Vec<usize>,
    alive: bool,
}

/// Merge points bottom-up until `num_clusters` remain.
///
/// Linkage between two clusters is the mean of the finite cross-pair
/// distances from the original matrix; pairs holding the sentinel are
/// excluded from the average, and a pair of clusters with no finite
/// cross-pair at all cannot merge. If only forbidden merges remain before
/// the requested count is reached, the largest `num_clusters` clusters are
/// kept and every remaining cluster is absorbed into the kept cluster with
/// the nearest spatial centroid, so the output always has exactly
/// `min(num_clusters, n)` clusters.
pub fn agglomerate(
    distances: &CensoredDistanceMatrix,
    coords: &[Pixel],
    num_clusters: usize,
) -> Result<Agglomeration> {
    let n = distances.len();
    if n == 0 {
        return Err(Error::EmptyInput("agglomerate distance matrix"));
    }
    if coords.len() != n {
        return Err(Error::ShapeMismatch {
            context: "agglomerate coordinates",
            expected: vec![n],
            actual: vec![coords.len()],
        });
    }
    if num_clusters == 0 || num_clusters > n {
        return Err(Error::InvalidParameter {
            name: "num_clusters",
            message: format!("must be in 1..={n}, got {num_clusters}"),
        });
    }

    let mut clusters: Vec<Cluster> = (0..n)
        .map(|i| Cluster {
            members: vec![i],
            alive: true,
        })
        .collect();
    // Pairwise (finite-sum, finite-count) linkage state, updated additively
    // on merges so the linkage always equals the mean over finite original
    // cross-pairs.
    let mut sum = vec![0.0f64; n * n];
    let mut cnt = vec![0u32; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            if !distances.is_censored(i, j) {
                sum[i * n + j] = distances.get(i, j);
                cnt[i * n + j] = 1;
            }
        }
    }

    let mut alive_count = n;
    while alive_count > num_clusters {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !clusters[i].alive {
                continue;
            }
            for j in (i + 1)..n {
                if !clusters[j].alive || cnt[i * n + j] == 0 {
                    continue;
                }
                let linkage = sum[i * n + j] / f64::from(cnt[i * n + j]);
                let better = match best {
                    None => true,
                    Some((d, _, _)) => linkage < d,
                };
                if better {
                    best = Some((linkage, i, j));
                }
            }
        }
        let Some((_, a, b)) = best else {
            break; // only forbidden merges remain
        };
        // Merge b into a; linkage state adds element-wise.
        let moved = std::mem::take(&mut clusters[b].members);
        clusters[a].members.extend(moved);
        clusters[b].alive = false;
        for k in 0..n {
            if k == a || k == b || !clusters[k].alive {
                continue;
            }
            let (ak_lo, ak_hi) = (a.min(k), a.max(k));
            let (bk_lo, bk_hi) = (b.min(k), b.max(k));
            sum[ak_lo * n + ak_hi] += sum[bk_lo * n + bk_hi];
            cnt[ak_lo * n + ak_hi] += cnt[bk_lo * n + bk_hi];
        }
        alive_count -= 1;
    }

    let mut alive: Vec<usize> = (0..n).filter(|&i| clusters[i].alive).collect();
    let clusters_before_fallback = alive.len();
    let fallback_applied = alive.len() > num_clusters;

    if fallback_applied {
        // Keep the largest clusters (ties toward the earliest cluster) and
        // fold the rest into the spatially nearest kept centroid.
        alive.sort_by(|&x, &y| {
            clusters[y]
                .members
                .len()
                .cmp(&clusters[x].members.len())
                .then(x.cmp(&y))
        });
        let (kept, dropped) = alive.split_at(num_clusters);
        let centroid = |members: &[usize]| -> (f64, f64) {
            let (mut sr, mut sc) = (0.0, 0.0);
            for &m in members {
                sr += coords[m].0 as f64;
                sc += coords[m].1 as f64;
            }
            let inv = 1.0 / members.len() as f64;
            (sr * inv, sc * inv)
        };
        let kept_centroids: Vec<(f64, f64)> =
            kept.iter().map(|&i| centroid(&clusters[i].members)).collect();
        let dropped_centroids: Vec<(f64, f64)> = dropped
            .iter()
            .map(|&i| centroid(&clusters[i].members))
            .collect();
        let dropped: Vec<usize> = dropped.to_vec();
        let kept: Vec<usize> = kept.to_vec();
        for (d, (dr, dc)) in dropped.into_iter().zip(dropped_centroids) {
            let mut best = 0usize;
            let mut best_dist = f64::INFINITY;
            for (pos, &(kr, kc)) in kept_centroids.iter().enumerate() {
                let dist = (kr - dr) * (kr - dr) + (kc - dc) * (kc - dc);
                if dist < best_dist {
                    best_dist = dist;
                    best = pos;
                }
            }
            let moved = std::mem::take(&mut clusters[d].members);
            clusters[kept[best]].members.extend(moved);
            clusters[d].alive = false;
        }
    }

    // Contiguous ids ordered by smallest member index.
    let mut final_clusters: Vec<usize> = (0..n).filter(|&i| clusters[i].alive).collect();
    final_clusters.sort_by_key(|&i| *clusters[i].members.iter().min().unwrap());
    let mut assignment = vec![usize::MAX; n];
    for (id, &c) in final_clusters.iter().enumerate() {
        for &m in &clusters[c].members {
            assignment[m] = id;
        }
    }
    debug_assert!(assignment.iter().all(|&a| a != usize::MAX));

    Ok(Agglomeration {
        assignment,
        clusters_before_fallback,
        fallback_applied,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scc::distance::INF_SENTINEL;

    fn matrix(n: usize, entries: Vec<f64>) -> CensoredDistanceMatrix {
        CensoredDistanceMatrix::from_entries(n, entries).unwrap()
    }

    #[test]
    fn two_tight_pairs_with_wide_gap() {
        // AB close, CD close, everything else far.
        let entries = vec![
            0.0, 1.0, 9.0, 9.0, //
            1.0, 0.0, 9.0, 9.0, //
            9.0, 9.0, 0.0, 1.0, //
            9.0, 9.0, 1.0, 0.0,
        ];
        let coords = vec![(0, 0), (0, 1), (5, 0), (5, 1)];
        let out = agglomerate(&matrix(4, entries), &coords, 2).unwrap();
        assert_eq!(out.assignment[0], out.assignment[1]);
        assert_eq!(out.assignment[2], out.assignment[3]);
        assert_ne!(out.assignment[0], out.assignment[2]);
        assert!(!out.fallback_applied);
    }

    #[test]
    fn n_clusters_means_singletons() {
        let entries = vec![
            0.0, 2.0, 3.0, //
            2.0, 0.0, 4.0, //
            3.0, 4.0, 0.0,
        ];
        let coords = vec![(0, 0), (1, 1), (2, 2)];
        let out = agglomerate(&matrix(3, entries), &coords, 3).unwrap();
        assert_eq!(out.assignment, vec![0, 1, 2]);
    }

    #[test]
    fn censored_blobs_refuse_to_merge() {
        // Two identical-feature singletons, censored apart. Requesting one
        // cluster forces the spatial fallback.
        let entries = vec![
            0.0,
            INF_SENTINEL, //
            INF_SENTINEL,
            0.0,
        ];
        let coords = vec![(0, 0), (10, 0)];
        let out = agglomerate(&matrix(2, entries), &coords, 1).unwrap();
        assert_eq!(out.clusters_before_fallback, 2);
        assert!(out.fallback_applied);
        // Fallback still delivers the requested single cluster.
        assert_eq!(out.assignment, vec![0, 0]);
    }

    #[test]
    fn partially_censored_linkage_averages_finite_pairs_only() {
        // After {A,B} forms, the {A,B}-D linkage must be the mean of the
        // single finite pair (3.5), not an average polluted by the
        // sentinel; D then joins before C does.
        let entries = vec![
            0.0,
            1.0,
            5.0,
            INF_SENTINEL, //
            1.0,
            0.0,
            INF_SENTINEL,
            3.5, //
            5.0,
            INF_SENTINEL,
            0.0,
            9.0, //
            INF_SENTINEL,
            3.5,
            9.0,
            0.0,
        ];
        let coords = vec![(0, 0), (0, 1), (3, 0), (3, 1)];
        let out = agglomerate(&matrix(4, entries), &coords, 2).unwrap();
        assert_eq!(out.assignment[0], out.assignment[1]);
        assert_eq!(out.assignment[0], out.assignment[3]);
        assert_ne!(out.assignment[0], out.assignment[2]);
    }

    #[test]
    fn rejects_empty_matrix() {
        let m = matrix(0, vec![]);
        assert!(matches!(
            agglomerate(&m, &[], 1).unwrap_err(),
            Error::EmptyInput(_) | Error::InvalidParameter { .. }
        ));
    }
}
