//! The trainable parameter bundle and its checkpoint format: one tensor
//! file per parameter plus a plain-text manifest.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classification::head::LinearHeadParams;
use crate::error::{Error, Result};
use crate::numerics::io::{tensor_read, tensor_write};
use crate::numerics::part_classifier::PartClassifierParams;
use crate::numerics::tensor::Tensor;
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::extractor::ExtractorParams;

/// Classifier heads of one training stage: global plus one per part.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadSet {
    pub global: LinearHeadParams,
    pub parts: Vec<LinearHeadParams>,
}

impl HeadSet {
    /// Fresh zero heads for the current cluster count: zero weights mean
    /// uniform predictions, a neutral start after every re-clustering.
    pub fn zeros(num_classes: usize, dim: usize, parts: usize) -> Self {
        Self {
            global: LinearHeadParams::zeros(num_classes, dim),
            parts: (0..parts)
                .map(|_| LinearHeadParams::zeros(num_classes, dim))
                .collect(),
        }
    }
}

/// Everything the optimizer touches.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub extractor: ExtractorParams,
    pub classifier: PartClassifierParams,
    /// Present only between a clustering stage and the end of the epoch's
    /// training stage; rebuilt whenever the cluster count changes.
    pub heads: Option<HeadSet>,
}

impl ModelParams {
    /// Seed-deterministic initialization. Weights are small uniform values
    /// scaled by fan-in; biases start at zero.
    pub fn init(config: &PipelineConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c_in = config.input_channels;
        let c_out = config.feature_dim;
        let scale_extractor = 1.0 / (c_in as f64).sqrt();
        let extractor_weight = Tensor::from_vec(
            &[c_out, c_in],
            (0..c_out * c_in)
                .map(|_| rng.gen_range(-scale_extractor..scale_extractor))
                .collect(),
        )?;
        let scale_classifier = 1.0 / ((c_out * 9) as f64).sqrt();
        let kernel = Tensor::from_vec(
            &[config.parts, c_out, 3, 3],
            (0..config.parts * c_out * 9)
                .map(|_| rng.gen_range(-scale_classifier..scale_classifier))
                .collect(),
        )?;
        Ok(Self {
            extractor: ExtractorParams {
                weight: extractor_weight,
                bias: vec![0.0; c_out],
            },
            classifier: PartClassifierParams::new(kernel, vec![0.0; config.parts])?,
            heads: None,
        })
    }

    /// Write all parameters under `dir` with a manifest.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut manifest = String::new();
        let mut write = |name: &str, tensor: &Tensor| -> Result<()> {
            let file = format!("{name}.tensor");
            tensor_write(&dir.join(&file), tensor)?;
            manifest.push_str(&format!("{name}\t{file}\n"));
            Ok(())
        };
        write("extractor_weight", &self.extractor.weight)?;
        write("extractor_bias", &vec_tensor(&self.extractor.bias))?;
        write("classifier_kernel", &self.classifier.kernel)?;
        write("classifier_bias", &vec_tensor(&self.classifier.bias))?;
        if let Some(heads) = &self.heads {
            write("head_global_weight", &heads.global.weight)?;
            write("head_global_bias", &vec_tensor(&heads.global.bias))?;
            for (k, head) in heads.parts.iter().enumerate() {
                write(&format!("head_part{k}_weight"), &head.weight)?;
                write(&format!("head_part{k}_bias"), &vec_tensor(&head.bias))?;
            }
        }
        fs::write(dir.join("manifest.tsv"), manifest)?;
        Ok(())
    }

    /// Load a checkpoint written by [`ModelParams::save`].
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = fs::read_to_string(dir.join("manifest.tsv"))?;
        let mut read = |name: &str| -> Result<Tensor> {
            for line in manifest.lines() {
                let mut fields = line.split('\t');
                if fields.next() == Some(name) {
                    let file = fields.next().ok_or_else(|| {
                        Error::Config(format!("manifest entry {name} lacks a path"))
                    })?;
                    return tensor_read(&dir.join(file));
                }
            }
            Err(Error::Config(format!("checkpoint misses tensor {name}")))
        };
        let extractor = ExtractorParams {
            weight: read("extractor_weight")?,
            bias: read("extractor_bias")?.into_data(),
        };
        let classifier = PartClassifierParams::new(
            read("classifier_kernel")?,
            read("classifier_bias")?.into_data(),
        )?;
        let heads = if manifest.contains("head_global_weight") {
            let global = LinearHeadParams {
                weight: read("head_global_weight")?,
                bias: read("head_global_bias")?.into_data(),
            };
            let mut parts = Vec::new();
            for k in 0.. {
                if !manifest.contains(&format!("head_part{k}_weight")) {
                    break;
                }
                parts.push(LinearHeadParams {
                    weight: read(&format!("head_part{k}_weight"))?,
                    bias: read(&format!("head_part{k}_bias"))?.into_data(),
                });
            }
            Some(HeadSet { global, parts })
        } else {
            None
        };
        Ok(Self {
            extractor,
            classifier,
            heads,
        })
    }
}

fn vec_tensor(v: &[f64]) -> Tensor {
    Tensor::from_vec(&[v.len()], v.to_vec()).expect("finite parameter vector")
}
