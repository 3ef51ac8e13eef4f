//! Pipeline configuration: a flat key-value TOML file, fully defaulted,
//! with every field overridable from the command line via `key = value`
//! pairs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weighted_memory::bank::UpdateStrategy;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    // Parsing.
    /// Number of part channels including background.
    pub parts: usize,
    /// Spatial censoring threshold as a fraction of the image diagonal.
    pub spatial_threshold_scale: f64,
    /// Momentum of the pseudo-mask smoothing; weighs the previous mask.
    pub mask_smooth_momentum: f64,
    /// Epoch at which mask smoothing momentum drops to zero.
    pub mask_smooth_zero_epoch: usize,

    // Memory.
    /// Momentum of the centroid update; weighs the previous centroid.
    pub memory_momentum: f64,
    /// Softmax temperature of the contrastive losses.
    pub temperature: f64,
    /// Memory update strategy: average, hardest, or weighted.
    pub update_strategy: String,
    /// Neighborhood size of the difficulty scores.
    pub difficulty_k: usize,

    // Identity clustering.
    /// Neighborhood size of the k-reciprocal encoding.
    pub reciprocal_k: usize,
    /// Reserved local-query-expansion size; accepted, currently unused.
    pub reciprocal_k2: usize,
    /// DBSCAN search radius on the Jaccard distances.
    pub dbscan_eps: f64,
    /// DBSCAN density threshold (neighborhood includes the point itself).
    pub dbscan_min_samples: usize,

    // Classification.
    /// Share of the original one-hot label in the distilled global label.
    pub distill_beta: f64,

    // Training loop.
    pub epochs: usize,
    pub iters_per_epoch: usize,
    pub batch_size: usize,
    /// Distinct pseudo identities sampled per batch.
    pub ids_per_batch: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Epoch span of the mask-agreement monitor in the logs.
    pub monitor_epochs: usize,

    // Synthetic data.
    pub num_identities: usize,
    pub samples_per_identity: usize,
    pub num_cameras: usize,
    pub input_channels: usize,
    /// Channels of the extracted feature map (= feature dimension).
    pub feature_dim: usize,
    pub height: usize,
    pub width: usize,
    /// Maximum absolute vertical offset of the person box, in pixels.
    pub offset_max: i64,
    /// Person box rows [person_top, person_bottom) before the offset.
    pub person_top: usize,
    pub person_bottom: usize,
    /// Person box columns [person_left, person_right).
    pub person_left: usize,
    pub person_right: usize,
    /// Norm scale of the shared per-part base signatures.
    pub signature_scale: f64,
    /// Norm scale of the identity-specific signature deviations.
    pub identity_deviation: f64,
    /// Per-component sigma of the fixed per-camera bias vector.
    pub camera_noise: f64,
    /// Per-component sigma of the i.i.d. pixel noise.
    pub pixel_noise: f64,
    /// Per-component sigma of the background values.
    pub background_noise: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            parts: 4,
            spatial_threshold_scale: 0.35,
            mask_smooth_momentum: 0.2,
            mask_smooth_zero_epoch: 20,
            memory_momentum: 0.2,
            temperature: 0.05,
            update_strategy: "weighted".into(),
            difficulty_k: 20,
            reciprocal_k: 20,
            reciprocal_k2: 0,
            dbscan_eps: 0.5,
            dbscan_min_samples: 4,
            distill_beta: 0.35,
            epochs: 8,
            iters_per_epoch: 8,
            batch_size: 16,
            ids_per_batch: 4,
            learning_rate: 0.05,
            seed: 42,
            monitor_epochs: 3,
            num_identities: 8,
            samples_per_identity: 12,
            num_cameras: 4,
            input_channels: 8,
            feature_dim: 32,
            height: 24,
            width: 12,
            offset_max: 3,
            person_top: 3,
            person_bottom: 21,
            person_left: 2,
            person_right: 10,
            signature_scale: 1.0,
            identity_deviation: 0.35,
            camera_noise: 0.08,
            pixel_noise: 0.05,
            background_noise: 0.05,
        }
    }
}

impl PipelineConfig {
    /// Load from an optional TOML file, then apply `key = value` overrides
    /// in order, then validate.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
            }
            None => toml::Table::new(),
        };
        for entry in overrides {
            let parsed: toml::Table = toml::from_str(entry)
                .map_err(|e| Error::Config(format!("bad override {entry:?}: {e}")))?;
            table.extend(parsed);
        }
        let config: PipelineConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Resolved censoring threshold in pixels.
    pub fn eta(&self) -> f64 {
        let h = self.height as f64;
        let w = self.width as f64;
        self.spatial_threshold_scale * (h * h + w * w).sqrt()
    }

    /// Mask smoothing momentum at a given epoch. The first epoch has no
    /// previous mask and always uses zero.
    pub fn mask_momentum_at(&self, epoch: usize) -> f64 {
        if epoch == 0 || epoch >= self.mask_smooth_zero_epoch {
            0.0
        } else {
            self.mask_smooth_momentum
        }
    }

    pub fn strategy(&self) -> Result<UpdateStrategy> {
        self.update_strategy.parse()
    }

    /// Ground-truth foreground parts generated by the synthesizer.
    pub fn gt_parts(&self) -> usize {
        self.parts - 1
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.parts < 2 {
            return fail(format!("parts must be >= 2, got {}", self.parts));
        }
        if !(self.spatial_threshold_scale > 0.0) {
            return fail("spatial_threshold_scale must be positive".into());
        }
        for (name, v) in [
            ("mask_smooth_momentum", self.mask_smooth_momentum),
            ("memory_momentum", self.memory_momentum),
            ("distill_beta", self.distill_beta),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if !(self.temperature > 0.0) {
            return fail("temperature must be positive".into());
        }
        self.strategy()?;
        if self.difficulty_k == 0 {
            return fail("difficulty_k must be positive".into());
        }
        if self.reciprocal_k < 2 {
            return fail("reciprocal_k must be >= 2".into());
        }
        if !(self.dbscan_eps > 0.0) {
            return fail("dbscan_eps must be positive".into());
        }
        if self.dbscan_min_samples == 0 {
            return fail("dbscan_min_samples must be positive".into());
        }
        if self.batch_size == 0 || self.ids_per_batch == 0 {
            return fail("batch_size and ids_per_batch must be positive".into());
        }
        if self.ids_per_batch > self.batch_size {
            return fail(format!(
                "ids_per_batch ({}) cannot exceed batch_size ({})",
                self.ids_per_batch, self.batch_size
            ));
        }
        if !(self.learning_rate >= 0.0) {
            return fail("learning_rate must be nonnegative".into());
        }
        if self.num_identities < 2 || self.samples_per_identity < 2 {
            return fail("need >= 2 identities with >= 2 samples each".into());
        }
        if self.num_cameras == 0 {
            return fail("num_cameras must be positive".into());
        }
        if self.input_channels == 0 || self.feature_dim == 0 {
            return fail("input_channels and feature_dim must be positive".into());
        }
        if self.height * self.width < 3 {
            return fail("image must have at least 3 pixels".into());
        }
        if self.person_top >= self.person_bottom || self.person_bottom > self.height {
            return fail("person box rows out of range".into());
        }
        if self.person_left >= self.person_right || self.person_right > self.width {
            return fail("person box columns out of range".into());
        }
        if self.offset_max < 0 {
            return fail("offset_max must be nonnegative".into());
        }
        let top = self.person_top as i64 - self.offset_max;
        let bottom = self.person_bottom as i64 + self.offset_max;
        if top < 0 || bottom > self.height as i64 {
            return fail(format!(
                "person box rows [{},{}) with offset_max {} leave the image",
                self.person_top, self.person_bottom, self.offset_max
            ));
        }
        let band_rows = self.person_bottom - self.person_top;
        if band_rows < self.gt_parts() {
            return fail(format!(
                "person box of {band_rows} rows cannot hold {} parts",
                self.gt_parts()
            ));
        }
        for (name, v) in [
            ("signature_scale", self.signature_scale),
            ("identity_deviation", self.identity_deviation),
            ("camera_noise", self.camera_noise),
            ("pixel_noise", self.pixel_noise),
            ("background_noise", self.background_noise),
        ] {
            if !(v >= 0.0) {
                return fail(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if !(self.signature_scale > 0.0) {
            return fail("signature_scale must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn eta_is_scaled_diagonal() {
        let config = PipelineConfig::default();
        let diagonal = ((24.0f64 * 24.0) + (12.0 * 12.0)).sqrt();
        assert!((config.eta() - 0.35 * diagonal).abs() < 1e-12);
    }

    #[test]
    fn overrides_apply_in_order() {
        let config = PipelineConfig::load(
            None,
            &["epochs = 3".into(), "epochs = 5".into(), "parts = 7".into()],
        )
        .unwrap();
        assert_eq!(config.epochs, 5);
        assert_eq!(config.parts, 7);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = PipelineConfig::load(None, &["not_a_field = 1".into()]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn invalid_strategy_is_rejected() {
        let err =
            PipelineConfig::load(None, &["update_strategy = \"softest\"".into()]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn offset_leaving_image_is_rejected() {
        let err = PipelineConfig::load(None, &["offset_max = 10".into()]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn mask_momentum_schedule() {
        let config = PipelineConfig::load(
            None,
            &[
                "mask_smooth_momentum = 0.2".into(),
                "mask_smooth_zero_epoch = 3".into(),
            ],
        )
        .unwrap();
        assert_eq!(config.mask_momentum_at(0), 0.0);
        assert_eq!(config.mask_momentum_at(1), 0.2);
        assert_eq!(config.mask_momentum_at(2), 0.2);
        assert_eq!(config.mask_momentum_at(3), 0.0);
        assert_eq!(config.mask_momentum_at(10), 0.0);
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join("scwm_config_tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("config.toml");
        std::fs::write(&path, "epochs = 2\nparts = 5\n").unwrap();
        let config = PipelineConfig::load(Some(&path), &["seed = 7".into()]).unwrap();
        assert_eq!(config.epochs, 2);
        assert_eq!(config.parts, 5);
        assert_eq!(config.seed, 7);
    }
}
