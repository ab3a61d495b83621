use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Binding, Linear, Mlp, ParamStore};
use crate::tensor::{Tape, Var};

use super::image_rows;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Width of each modality after its projection in the geometry-based fusion.
    pub inter_width: usize,
    pub gfused_width: usize,
    pub sfused_width: usize,
    pub heads: usize,
    pub blocks: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { inter_width: 32, gfused_width: 64, sfused_width: 64, heads: 4, blocks: 6 }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.sfused_width % self.heads != 0 {
            return Err(Error::Config(format!(
                "semantic fusion width {} is not divisible by {} heads",
                self.sfused_width, self.heads
            )));
        }
        if [self.inter_width, self.gfused_width, self.sfused_width].contains(&0) {
            return Err(Error::Config("fusion widths must be positive".into()));
        }
        Ok(())
    }
}

/// Point-wise fusion `MLP(F_lidar W1 || F_cam W2)`.
#[derive(Clone, Debug)]
pub struct Gffm {
    pub lidar_proj: Linear,
    pub camera_proj: Linear,
    pub mlp: Mlp,
}

impl Gffm {
    pub fn new(store: &mut ParamStore, lidar: usize, camera: usize, cfg: &FusionConfig, rng: &mut impl Rng) -> Self {
        let c = cfg.inter_width;
        Self {
            lidar_proj: Linear::new(store, "gffm.lidar", lidar, c, false, rng),
            camera_proj: Linear::new(store, "gffm.camera", camera, c, false, rng),
            mlp: Mlp::new(store, "gffm.mlp", [2 * c, cfg.gfused_width, cfg.gfused_width], rng),
        }
    }

    pub fn forward(&self, tape: &mut Tape, bind: &Binding, f_lidar: Var, f_cam: Var) -> Result<Var> {
        if tape.value(f_lidar).rows() != tape.value(f_cam).rows() {
            return Err(Error::shape("gffm", "modalities disagree on the number of points"));
        }
        let a = self.lidar_proj.forward(tape, bind, f_lidar)?;
        let b = self.camera_proj.forward(tape, bind, f_cam)?;
        let x = tape.concat_cols(&[a, b])?;
        self.mlp.forward(tape, bind, x)
    }
}

/// Class embeddings and the distribution behind them.
#[derive(Clone, Copy, Debug)]
pub struct SfamOutput {
    /// `[N_cls, C]`.
    pub embeddings: Var,
    /// Unnormalized per-element class scores `[N_elem, N_cls]`, supervised directly.
    pub logits: Var,
    /// `[N_cls, N_elem]`, each row a softmax over elements.
    pub distribution: Var,
    /// `[N_elem, C]` features the embeddings average.
    pub features: Var,
}

fn aggregate(tape: &mut Tape, head: &Mlp, bind: &Binding, features: Var) -> Result<SfamOutput> {
    if tape.value(features).rows() == 0 {
        return Err(Error::Empty("semantic aggregation needs at least one element"));
    }
    let logits = head.forward(tape, bind, features)?;
    class_embeddings(tape, logits, features)
}

/// Softmax of `logits` over the element axis per class, then the weighted sum of `features`.
pub fn class_embeddings(tape: &mut Tape, logits: Var, features: Var) -> Result<SfamOutput> {
    if tape.value(logits).rows() != tape.value(features).rows() || tape.value(logits).rows() == 0 {
        return Err(Error::shape("class_embeddings", "logits and features must share a non-empty element axis"));
    }
    let t = tape.transpose(logits)?;
    let distribution = tape.softmax(t, 1)?;
    let embeddings = tape.matmul(distribution, features)?;
    Ok(SfamOutput { embeddings, logits, distribution, features })
}

/// Class embeddings of the voxel features.
#[derive(Clone, Debug)]
pub struct LidarSfam {
    pub head: Mlp,
}

impl LidarSfam {
    pub fn new(store: &mut ParamStore, width: usize, classes: usize, rng: &mut impl Rng) -> Self {
        Self { head: Mlp::new(store, "sfam.lidar", [width, width, classes], rng) }
    }

    pub fn forward(&self, tape: &mut Tape, bind: &Binding, voxel_feats: Var) -> Result<SfamOutput> {
        aggregate(tape, &self.head, bind, voxel_feats)
    }
}

/// Class embeddings over every pixel of every camera at once.
#[derive(Clone, Debug)]
pub struct CameraSfam {
    pub head: Mlp,
}

impl CameraSfam {
    pub fn new(store: &mut ParamStore, width: usize, classes: usize, rng: &mut impl Rng) -> Self {
        Self { head: Mlp::new(store, "sfam.camera", [width, width, classes], rng) }
    }

    /// `image_feats` is `[N_cam, C, H, W]`; elements are pixels in camera-major raster order.
    pub fn forward(&self, tape: &mut Tape, bind: &Binding, image_feats: Var) -> Result<SfamOutput> {
        let rows = image_rows(tape, image_feats)?;
        aggregate(tape, &self.head, bind, rows)
    }
}

/// LiDAR-to-camera feature regressor used for completion.
#[derive(Clone, Debug)]
pub struct PseudoCamera {
    pub head: Mlp,
}

impl PseudoCamera {
    pub fn new(store: &mut ParamStore, lidar: usize, camera: usize, rng: &mut impl Rng) -> Self {
        Self { head: Mlp::new(store, "pcam", [lidar, lidar, camera], rng) }
    }

    pub fn forward(&self, tape: &mut Tape, bind: &Binding, f_lidar: Var) -> Result<Var> {
        self.head.forward(tape, bind, f_lidar)
    }
}
