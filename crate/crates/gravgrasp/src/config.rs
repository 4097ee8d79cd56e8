//! Pipeline configuration, one JSON file for every stage.

use std::path::Path;

use gravgrasp_core::annotation::BasisOrder;
use gravgrasp_core::closure::ClosureConfig;
use gravgrasp_core::geometry::{default_truncation, CameraModel, DepthNoise, GridSpec};
use gravgrasp_core::hand::GripperParams;
use gravgrasp_core::sampling::SamplerConfig;
use gravgrasp_core::scene::{GravityProjectionParams, SceneConfig};
use gravgrasp_core::wrench::{ContactForceLimits, SearchConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::{read, sha256_hex};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenesConfig {
    pub count: usize,
    pub min_objects: usize,
    pub max_objects: usize,
    pub seed: u64,
    pub placement: SceneConfig,
}

impl Default for ScenesConfig {
    fn default() -> Self {
        Self { count: 4, min_objects: 1, max_objects: 5, seed: 0, placement: SceneConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Gaussian depth noise [m]; zero renders noiseless depth.
    pub noise_sigma: f64,
    /// Defaults to four voxels.
    pub truncation: Option<f64>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { noise_sigma: 0.0, truncation: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub approach_clearance: f64,
    pub approach_step: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { approach_clearance: 0.1, approach_step: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub gripper: GripperParams,
    pub sampler: SamplerConfig,
    pub closure: ClosureConfig,
    pub cone_edges: usize,
    pub search: SearchConfig,
    pub projection: GravityProjectionParams,
    pub grid: GridSpec,
    pub rotation_order: BasisOrder,
    pub render: RenderConfig,
    pub scenes: ScenesConfig,
    pub eval: EvalSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            gripper: GripperParams::default(),
            sampler: SamplerConfig::default(),
            closure: ClosureConfig::default(),
            cone_edges: 8,
            search: SearchConfig::default(),
            projection: GravityProjectionParams::default(),
            grid: GridSpec::default(),
            rotation_order: BasisOrder::ExEz,
            render: RenderConfig::default(),
            scenes: ScenesConfig::default(),
            eval: EvalSettings::default(),
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_slice(&read(path)?).map_err(|e| Error::json(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gripper.validate().map_err(invalid)?;
        self.sampler.validate().map_err(invalid)?;
        self.closure.validate().map_err(invalid)?;
        self.limits().validate().map_err(invalid)?;
        self.projection.validate().map_err(invalid)?;
        self.grid.validate().map_err(invalid)?;
        if !(self.search.f_max > 0.0 && self.search.resolution > 0.0) {
            return Err(invalid("search f_max and resolution must be positive"));
        }
        let s = &self.scenes;
        if !(1 <= s.min_objects && s.min_objects <= s.max_objects && s.max_objects <= 5) {
            return Err(invalid("scene object counts must satisfy 1 <= min <= max <= 5"));
        }
        if !(self.render.noise_sigma >= 0.0) {
            return Err(invalid("noise_sigma must be non-negative"));
        }
        if self.truncation() <= self.grid.voxel_size {
            return Err(invalid("truncation must exceed the voxel size"));
        }
        if !(self.eval.approach_clearance >= 0.0 && self.eval.approach_step > 0.0) {
            return Err(invalid("approach clearance must be non-negative and its step positive"));
        }
        Ok(())
    }

    pub fn limits(&self) -> ContactForceLimits {
        ContactForceLimits { cone_edges: self.cone_edges, ..ContactForceLimits::from_gripper(&self.gripper) }
    }

    pub fn truncation(&self) -> f64 {
        self.render.truncation.unwrap_or_else(|| default_truncation(&self.grid))
    }

    pub fn camera(&self) -> CameraModel {
        CameraModel::default_scene_camera()
    }

    /// Depth noise seeded per scene, if enabled.
    pub fn noise(&self, seed: u64) -> Option<DepthNoise> {
        (self.render.noise_sigma > 0.0).then_some(DepthNoise { sigma: self.render.noise_sigma, seed })
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_fill_defaults() {
        let cfg: PipelineConfig = serde_json::from_str(r#"{"sampler": {"rng_seed": 42}}"#).unwrap();
        assert_eq!(cfg.sampler.rng_seed, 42);
        assert_eq!(cfg.gripper, GripperParams::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"gripper": {"aperture": 0.1}}"#).is_err());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"extra": 1}"#).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.projection.epsilon = 0.9;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = PipelineConfig::default();
        cfg.scenes.max_objects = 6;
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig { cone_edges: 3, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.sampler.rng_seed = 1;
        assert_ne!(a.hash(), b.hash());
        let text = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<PipelineConfig>(&text).unwrap().hash(), a.hash());
    }
}
