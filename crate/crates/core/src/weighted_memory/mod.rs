//! The weighted memory: difficulty scores from kNN overlap, the batch
//! weighting strategies, momentum centroid updates, and the contrastive
//! losses that train against the bank.

pub mod bank;
pub mod difficulty;
pub mod losses;

pub use bank::{
    average_update_weights, hardest_update_weights, BatchWeights, MemoryBank, MemorySample,
    UpdateStrategy,
};
pub use difficulty::{batch_weights, difficulty_scores, DifficultyScores};
pub use losses::{
    part_separation_loss, weighted_memory_loss, weighted_nce_loss, FeatureGrads, SampleFeatures,
};
