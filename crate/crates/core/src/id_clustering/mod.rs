//! Identity pseudo-labeling: kNN over global features, Jaccard distance
//! on k-reciprocal neighbor sets, density clustering with outliers, and
//! the initial cluster centroids for the memory.

pub mod dbscan;
pub mod init;
pub mod jaccard;
pub mod knn;

pub use dbscan::{dbscan, PseudoLabels, OUTLIER};
pub use init::{init_memory, SpaceFeatures};
pub use jaccard::{k_reciprocal_jaccard, DistanceMatrix};
pub use knn::{nearest_neighbors, NeighborSets};
