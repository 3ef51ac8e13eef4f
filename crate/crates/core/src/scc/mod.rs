//! Spatial cascaded clustering: pseudo parsing masks from a feature map
//! via a magnitude-based foreground split and spatially censored
//! agglomerative clustering, plus the losses that supervise the part
//! classifier with those masks.

pub mod agglomerative;
pub mod distance;
pub mod foreground;
pub mod losses;
pub mod masks;

pub use agglomerative::{agglomerate, Agglomeration};
pub use distance::{censored_distance, CensoredDistanceMatrix, INF_SENTINEL};
pub use foreground::{foreground_split, ForegroundSplit};
pub use losses::{diversity_loss, parsing_loss, scc_loss};
pub use masks::{build_masks, smooth_masks};

use crate::error::Result;
use crate::numerics::tensor::{HardMask, Tensor};

/// Run the full cascade on one feature map: split foreground from
/// background by magnitude, cluster the foreground pixels under the
/// spatial censoring threshold `eta`, and assemble the one-hot mask with
/// `parts` channels (foreground channels height-ordered, background last).
pub fn generate_pseudo_masks(feature_map: &Tensor, eta: f64, parts: usize) -> Result<HardMask> {
    let dims = feature_map.dims();
    let (h, w) = (dims[1], dims[2]);
    let split = foreground_split(feature_map)?;
    let foreground = split.foreground();
    let assignment = if foreground.is_empty() {
        Vec::new()
    } else {
        // Tiny foregrounds cannot fill every part channel; the mask builder
        // leaves the surplus channels empty.
        let clusters = (parts - 1).min(foreground.len());
        let censored = censored_distance(feature_map, &foreground, eta)?;
        agglomerate(&censored, &foreground, clusters)?.assignment
    };
    build_masks(&split, &foreground, &assignment, h, w, parts)
}
