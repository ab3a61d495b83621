use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::eval::{AbsentClasses, DistanceBins, Scope};
use crate::model::{ModelConfig, Toggles, Variant};
use crate::nn::OptimizerConfig;
use crate::scene::SceneSpec;
use crate::supervision::LossWeights;

/// One experiment: every knob that influences a result lives here.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub scene: SceneSpec,
    pub model: ModelConfig,
    pub toggles: Toggles,
    pub augment: AugmentConfig,
    pub loss: LossWeights,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub ablate: AblateConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub train_scenes: usize,
    pub val_scenes: usize,
    /// Sweeps stored per scene, the current one included.
    pub sweeps: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self { train_scenes: 200, val_scenes: 50, sweeps: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Scenes per gradient step.
    pub batch_size: usize,
    /// Current-sweep points supervised per scene and step.
    pub points_per_scene: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { iterations: 3000, batch_size: 1, points_per_scene: 1024, optimizer: OptimizerConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Points the headline numbers are computed on.
    pub scope: Scope,
    pub distance_bins: DistanceBins,
    pub absent_classes: AbsentClasses,
    /// Points per forward pass; bounds memory only, not results.
    pub chunk: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { scope: Scope::All, distance_bins: DistanceBins::default(), absent_classes: AbsentClasses::default(), chunk: 2048 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateConfig {
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    /// Overrides `train.iterations` for every run of the sweep.
    pub iterations: Option<usize>,
    /// Number of broken cameras, applied to the full model as cameras `0..k`.
    pub camera_drops: Vec<usize>,
    /// Sweep counts evaluated with the full model.
    pub frame_counts: Vec<usize>,
    /// Validation scenes used by the sweep; `None` uses the whole split.
    pub val_scenes: Option<usize>,
}

impl Default for AblateConfig {
    fn default() -> Self {
        Self {
            variants: Variant::ALL.to_vec(),
            seeds: vec![0, 1, 2],
            iterations: None,
            camera_drops: vec![0, 1, 2, 3, 4, 5],
            frame_counts: vec![1, 2, 3],
            val_scenes: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.scene.validate()?;
        self.model.validate()?;
        self.toggles.validate()?;
        self.augment.validate()?;
        self.train.optimizer.validate()?;
        self.eval.distance_bins.validate()?;
        if self.model.num_classes != crate::scene::NUM_CLASSES {
            return bad(format!("the synthetic corpus has {} classes", crate::scene::NUM_CLASSES));
        }
        if self.corpus.train_scenes == 0 || self.corpus.val_scenes == 0 {
            return bad("corpus needs at least one train and one val scene".into());
        }
        if self.corpus.sweeps == 0 {
            return bad("corpus.sweeps must be at least 1".into());
        }
        if self.toggles.multi_frame_count > self.corpus.sweeps {
            return bad(format!(
                "multi_frame_count {} exceeds the {} sweeps stored per scene",
                self.toggles.multi_frame_count, self.corpus.sweeps
            ));
        }
        if let Some(&c) = self.toggles.dropped_cameras.iter().find(|&&c| c >= self.scene.num_cameras) {
            return bad(format!("dropped camera {c} is not in the {}-camera rig", self.scene.num_cameras));
        }
        if self.train.batch_size == 0 || self.train.points_per_scene == 0 || self.eval.chunk == 0 {
            return bad("batch_size, points_per_scene and eval.chunk must be positive".into());
        }
        let w = &self.loss;
        if [w.point, w.point_to_voxel, w.point_to_pixel, w.pixel_to_point].iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return bad("loss weights must be non-negative".into());
        }
        let a = &self.ablate;
        if a.camera_drops.iter().any(|&k| k > self.scene.num_cameras) {
            return bad("ablate.camera_drops cannot exceed the camera count".into());
        }
        if a.frame_counts.iter().any(|&k| k == 0 || k > self.corpus.sweeps) {
            return bad("ablate.frame_counts must lie in 1..=corpus.sweeps".into());
        }
        for &v in &a.variants {
            self.toggles_for(v).validate()?;
        }
        Ok(())
    }

    /// The configured toggles with the structural switches of `v`.
    pub fn toggles_for(&self, v: Variant) -> Toggles {
        Toggles {
            multi_frame_count: self.toggles.multi_frame_count,
            dropped_cameras: self.toggles.dropped_cameras.clone(),
            ..Toggles::variant(v)
        }
    }
}
