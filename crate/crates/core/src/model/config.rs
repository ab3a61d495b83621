use serde::{Deserialize, Serialize};

use crate::backbone::BackboneConfig;
use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::geometry::DEFAULT_VOXEL_SIZE;
use crate::scene::NUM_CLASSES;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub num_classes: usize,
    pub voxel_size: f64,
    /// Multiplier applied to point coordinates before they enter the network.
    pub coord_scale: f64,
    pub backbone: BackboneConfig,
    pub fusion: FusionConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_classes: NUM_CLASSES,
            voxel_size: DEFAULT_VOXEL_SIZE,
            coord_scale: 0.1,
            backbone: BackboneConfig::default(),
            fusion: FusionConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let b = &self.backbone;
        if self.num_classes < 2 {
            return Err(Error::Config("need at least one class besides the ignored one".into()));
        }
        if !(self.voxel_size > 0.0 && self.voxel_size.is_finite() && self.coord_scale > 0.0 && self.coord_scale.is_finite()) {
            return Err(Error::Config("voxel_size and coord_scale must be positive".into()));
        }
        if b.voxel_width == 0 || b.image_width == 0 || b.stride == 0 {
            return Err(Error::Config("backbone widths and stride must be positive".into()));
        }
        if b.levels.iter().any(|&f| f < 2) {
            return Err(Error::Config("voxel grid coarsening factors must be at least 2".into()));
        }
        self.fusion.validate()
    }
}

/// Switches that select one row of the fusion ablation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    /// Geometry-based fusion with camera features.
    pub use_camera: bool,
    /// Pseudo-camera regressor trained by the completion loss.
    pub use_pixel2point: bool,
    /// Pseudo-camera rows replace the zero rows of points outside the cameras.
    pub use_completion: bool,
    /// Semantic-based fusion on top of the geometry-based one.
    pub use_sf_phase: bool,
    /// Sweeps collapsed into each sample, the current one included.
    pub multi_frame_count: usize,
    /// Cameras treated as broken: black images and no point hits.
    pub dropped_cameras: Vec<usize>,
}

impl Default for Toggles {
    fn default() -> Self {
        Self::variant(Variant::Full)
    }
}

/// Rows of the fusion ablation, each adding one stage to the previous.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    LidarOnly,
    GeometryFusion,
    PixelToPoint,
    Completion,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::LidarOnly, Variant::GeometryFusion, Variant::PixelToPoint, Variant::Completion, Variant::Full];

    pub fn name(self) -> &'static str {
        match self {
            Variant::LidarOnly => "lidar_only",
            Variant::GeometryFusion => "geometry_fusion",
            Variant::PixelToPoint => "pixel_to_point",
            Variant::Completion => "completion",
            Variant::Full => "full",
        }
    }
}

impl Toggles {
    pub fn variant(v: Variant) -> Self {
        let rank = Variant::ALL.iter().position(|&x| x == v).expect("listed");
        Self {
            use_camera: rank >= 1,
            use_pixel2point: rank >= 2,
            use_completion: rank >= 3,
            use_sf_phase: rank >= 4,
            multi_frame_count: 1,
            dropped_cameras: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.use_sf_phase && !self.use_camera {
            return bad("semantic-based fusion requires geometry-based fusion (use_camera)");
        }
        if self.use_pixel2point && !self.use_camera {
            return bad("the completion loss needs camera features (use_camera)");
        }
        if self.use_completion && !self.use_pixel2point {
            return bad("completion needs the pseudo-camera regressor (use_pixel2point)");
        }
        if self.multi_frame_count == 0 {
            return bad("multi_frame_count must be at least 1");
        }
        Ok(())
    }

    /// Same switches for the network structure; eval-time settings may differ.
    pub fn same_architecture(&self, other: &Self) -> bool {
        (self.use_camera, self.use_pixel2point, self.use_completion, self.use_sf_phase)
            == (other.use_camera, other.use_pixel2point, other.use_completion, other.use_sf_phase)
    }
}
