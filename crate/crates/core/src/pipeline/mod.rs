//! End-to-end orchestration: synthetic data, the toy extractor, the
//! alternating clustering/training loop, evaluation, and configuration.

pub mod config;
pub mod extractor;
pub mod features;
pub mod model;
pub mod stages;
pub mod synth;

pub use config::PipelineConfig;
pub use model::{HeadSet, ModelParams};
pub use synth::{generate_dataset, SyntheticDataset, SyntheticSample};
