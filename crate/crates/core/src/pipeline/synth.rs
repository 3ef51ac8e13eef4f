//! Synthetic dataset with ground-truth identities and part bands.
//!
//! Each identity is a stack of per-part signature vectors placed in
//! vertically adjoining bands inside a person box. Parts share a common
//! base signature across identities, with an identity-specific deviation
//! on top, so telling people apart requires the fine detail while the
//! coarse band structure is common — the regime where part pooling has to
//! be aligned to pay off. Per-sample vertical offsets and per-camera bias
//! vectors stand in for pose and camera variation.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::numerics::tensor::{HardMask, Tensor};
use crate::pipeline::config::PipelineConfig;

/// One generated sample.
#[derive(Debug, Clone)]
pub struct SyntheticSample {
    /// C_in x H x W input grid.
    pub input: Tensor,
    pub gt_identity: usize,
    /// Ground-truth one-hot mask, `parts` channels, background last.
    pub gt_part_mask: HardMask,
    pub camera_id: usize,
    pub vertical_offset: i64,
}

/// The full synthetic dataset.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub samples: Vec<SyntheticSample>,
    pub num_identities: usize,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; two uniform draws per call keeps the stream simple and
    // reproducible.
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn random_direction(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        if let Ok(unit) = crate::numerics::vec_ops::l2_normalize(&v) {
            return unit;
        }
    }
}

/// Generate the dataset for `config`, deterministically from `seed`.
pub fn generate_dataset(config: &PipelineConfig, seed: u64) -> Result<SyntheticDataset> {
    config.validate()?;
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let c_in = config.input_channels;
    let gt_parts = config.gt_parts();
    let (h, w) = (config.height, config.width);

    // Shared per-part base signatures, then identity deviations.
    let bases: Vec<Vec<f64>> = (0..gt_parts)
        .map(|_| {
            random_direction(c_in, &mut rng)
                .into_iter()
                .map(|v| v * config.signature_scale)
                .collect()
        })
        .collect();
    let signatures: Vec<Vec<Vec<f64>>> = (0..config.num_identities)
        .map(|_| {
            bases
                .iter()
                .map(|base| {
                    let deviation = random_direction(c_in, &mut rng);
                    base.iter()
                        .zip(&deviation)
                        .map(|(b, d)| b + d * config.identity_deviation)
                        .collect()
                })
                .collect()
        })
        .collect();
    let camera_bias: Vec<Vec<f64>> = (0..config.num_cameras)
        .map(|_| {
            (0..c_in)
                .map(|_| gaussian(&mut rng) * config.camera_noise)
                .collect()
        })
        .collect();

    let box_rows = config.person_bottom - config.person_top;
    let mut samples = Vec::with_capacity(config.num_identities * config.samples_per_identity);
    for identity in 0..config.num_identities {
        for instance in 0..config.samples_per_identity {
            let camera_id = instance % config.num_cameras;
            let vertical_offset = if config.offset_max == 0 {
                0
            } else {
                rng.gen_range(-config.offset_max..=config.offset_max)
            };
            let top = (config.person_top as i64 + vertical_offset) as usize;

            let mut input = Tensor::zeros(&[c_in, h, w]);
            let mut gt_mask = Tensor::zeros(&[config.parts, h, w]);
            for row in 0..h {
                for col in 0..w {
                    let in_box = row >= top
                        && row < top + box_rows
                        && col >= config.person_left
                        && col < config.person_right;
                    let part = if in_box {
                        // Equal-height bands, remainder rows absorbed by the
                        // last band.
                        (((row - top) * gt_parts) / box_rows).min(gt_parts - 1)
                    } else {
                        gt_parts // background channel
                    };
                    gt_mask.set3(part, row, col, 1.0);
                    for channel in 0..c_in {
                        let signal = if in_box {
                            signatures[identity][part][channel]
                        } else {
                            gaussian(&mut rng) * config.background_noise
                        };
                        let value = signal
                            + camera_bias[camera_id][channel]
                            + gaussian(&mut rng) * config.pixel_noise;
                        input.set3(channel, row, col, value);
                    }
                }
            }
            samples.push(SyntheticSample {
                input,
                gt_identity: identity,
                gt_part_mask: gt_mask,
                camera_id,
                vertical_offset,
            });
        }
    }
    Ok(SyntheticDataset {
        samples,
        num_identities: config.num_identities,
    })
}
