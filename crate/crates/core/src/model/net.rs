use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backbone::{ImageBackbone, ImageEncoder, VoxelBackbone, VoxelEncoder};
use crate::error::{Error, Result};
use crate::fusion::{complete_features, image_rows, sampling_rows, CameraSfam, Gffm, LidarSfam, PseudoCamera, SfamOutput, Sffm};
use crate::geometry::ProjectionIndex;
use crate::nn::{Binding, Mlp, ParamStore};
use crate::scene::IGNORE;
use crate::supervision::{cross_entropy, lovasz_softmax, pixel2point_loss, total_loss, LossParts, LossWeights};
use crate::tensor::{SparseRows, Tape, Tensor, Var};

use super::{ModelConfig, Prepared, Toggles};

/// Point-independent part of a forward pass.
#[derive(Clone, Debug)]
pub struct SceneFeatures {
    /// `[N_voxel, C_voxel]`.
    pub voxels: Var,
    /// `[N_cam * H * W, C_img]` image features, camera-major raster order.
    pub image_rows: Option<Var>,
    pub cameras: usize,
    pub feature_size: (usize, usize),
    pub lidar_sfam: Option<SfamOutput>,
    pub camera_sfam: Option<SfamOutput>,
    /// Class embeddings entering each semantic-fusion block.
    pub embeddings: Vec<Var>,
    pub self_attention: Vec<Var>,
}

/// Point-level outputs for the selected points.
#[derive(Clone, Debug)]
pub struct PointOutput {
    /// `[N_point, N_cls]`.
    pub logits: Var,
    pub f_lidar: Var,
    pub f_cam: Option<Var>,
    pub f_pcam: Option<Var>,
    pub mask: Vec<bool>,
    pub cross_attention: Vec<Var>,
}

/// Loss values of one training step; absent terms belong to disabled branches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub total: f64,
    pub point: Option<f64>,
    pub point_to_voxel: Option<f64>,
    pub point_to_pixel: Option<f64>,
    pub pixel_to_point: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    model: ModelConfig,
    toggles: Toggles,
}

#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub toggles: Toggles,
    pub params: ParamStore,
    voxel: VoxelBackbone,
    image: Option<ImageBackbone>,
    pcam: Option<PseudoCamera>,
    gffm: Option<Gffm>,
    lidar_sfam: Option<LidarSfam>,
    camera_sfam: Option<CameraSfam>,
    sffm: Option<Sffm>,
    head: Mlp,
}

/// Voxel input width: scaled coordinates, reflectance and the in-voxel offset.
const VOXEL_INPUT: usize = 7;

impl Model {
    pub fn new(config: ModelConfig, toggles: Toggles, seed: u64) -> Result<Self> {
        config.validate()?;
        toggles.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ParamStore::new();
        let b = &config.backbone;
        let f = &config.fusion;
        let k = config.num_classes;
        let voxel = VoxelBackbone::new(&mut p, VOXEL_INPUT, b, &mut rng);
        let image = toggles
            .use_camera
            .then(|| ImageBackbone::new(&mut p, b.image_width, b.stride, &mut rng))
            .transpose()?;
        let pcam = toggles.use_pixel2point.then(|| PseudoCamera::new(&mut p, b.voxel_width, b.image_width, &mut rng));
        let gffm = toggles.use_camera.then(|| Gffm::new(&mut p, b.voxel_width, b.image_width, f, &mut rng));
        let (lidar_sfam, camera_sfam, sffm) = if toggles.use_sf_phase {
            (
                Some(LidarSfam::new(&mut p, b.voxel_width, k, &mut rng)),
                Some(CameraSfam::new(&mut p, b.image_width, k, &mut rng)),
                Some(Sffm::new(&mut p, [f.gfused_width, b.voxel_width, b.image_width], f, &mut rng)?),
            )
        } else {
            (None, None, None)
        };
        let head_in = if toggles.use_sf_phase {
            f.sfused_width
        } else if toggles.use_camera {
            f.gfused_width
        } else {
            b.voxel_width
        };
        let head = Mlp::new(&mut p, "head", [head_in, head_in, k], &mut rng);
        Ok(Self { config, toggles, params: p, voxel, image, pcam, gffm, lidar_sfam, camera_sfam, sffm, head })
    }

    pub fn scene_stage(&self, tape: &mut Tape, bind: &Binding, prep: &Prepared) -> Result<SceneFeatures> {
        let voxels = self.voxel.forward(tape, bind, &prep.voxels)?;
        let mut out = SceneFeatures {
            voxels,
            image_rows: None,
            cameras: 0,
            feature_size: (0, 0),
            lidar_sfam: None,
            camera_sfam: None,
            embeddings: Vec::new(),
            self_attention: Vec::new(),
        };
        let Some(image) = &self.image else { return Ok(out) };
        let images = prep.images.clone().ok_or(Error::InvalidArgument("camera model needs images".into()))?;
        let x = tape.constant(images)?;
        let maps = image.forward(tape, bind, x)?;
        let shape = tape.value(maps).shape().to_vec();
        out.cameras = shape[0];
        out.feature_size = (shape[2], shape[3]);
        let rows = image_rows(tape, maps)?;
        out.image_rows = Some(rows);
        if let (Some(ls), Some(cs), Some(sffm)) = (&self.lidar_sfam, &self.camera_sfam, &self.sffm) {
            let l = ls.forward(tape, bind, voxels)?;
            let c = cs.forward(tape, bind, maps)?;
            let (embeddings, maps) = sffm.embeddings(tape, bind, l.embeddings, c.embeddings)?;
            out.lidar_sfam = Some(l);
            out.camera_sfam = Some(c);
            out.embeddings = embeddings;
            out.self_attention = maps;
        }
        Ok(out)
    }

    pub fn point_stage(
        &self,
        tape: &mut Tape,
        bind: &Binding,
        scene: &SceneFeatures,
        devox: &SparseRows,
        projection: &ProjectionIndex,
        input_size: (usize, usize),
    ) -> Result<PointOutput> {
        if devox.rows() != projection.len() {
            return Err(Error::shape("point_stage", "devoxelization and projection disagree on point count"));
        }
        let f_lidar = tape.sparse_mix(scene.voxels, devox.clone())?;
        let mask = projection.mask();
        let mut out = PointOutput { logits: f_lidar, f_lidar, f_cam: None, f_pcam: None, mask, cross_attention: Vec::new() };
        let (Some(rows), Some(gffm)) = (scene.image_rows, &self.gffm) else {
            out.logits = self.head.forward(tape, bind, f_lidar)?;
            return Ok(out);
        };
        let sampler = sampling_rows(projection, scene.cameras, scene.feature_size, input_size)?;
        let f_cam = tape.sparse_mix(rows, sampler)?;
        out.f_cam = Some(f_cam);
        let mut camera_in = f_cam;
        if let Some(pcam) = &self.pcam {
            let f_pcam = pcam.forward(tape, bind, f_lidar)?;
            out.f_pcam = Some(f_pcam);
            if self.toggles.use_completion {
                let fixed = tape.detach(f_pcam)?;
                camera_in = complete_features(tape, f_cam, fixed, &out.mask)?;
            }
        }
        let fused = gffm.forward(tape, bind, f_lidar, camera_in)?;
        let head_in = match &self.sffm {
            Some(sffm) => {
                let (f, maps) = sffm.attend(tape, bind, fused, &scene.embeddings)?;
                out.cross_attention = maps;
                f
            }
            None => fused,
        };
        out.logits = self.head.forward(tape, bind, head_in)?;
        Ok(out)
    }

    /// Loss terms of every enabled branch.
    pub fn losses(&self, tape: &mut Tape, scene: &SceneFeatures, points: &PointOutput, prep: &Prepared) -> Result<LossParts> {
        let seg = |tape: &mut Tape, logits: Var, labels: &[usize]| -> Result<Var> {
            let ce = cross_entropy(tape, logits, labels)?;
            let probs = tape.softmax(logits, 1)?;
            let lov = lovasz_softmax(tape, probs, labels)?;
            tape.add(ce, lov)
        };
        let mut parts = LossParts { point: Some(seg(tape, points.logits, &prep.labels)?), ..LossParts::default() };
        if let Some(l) = &scene.lidar_sfam {
            parts.point_to_voxel = Some(seg(tape, l.logits, &prep.voxel_labels)?);
        }
        if let Some(c) = &scene.camera_sfam {
            parts.point_to_pixel = Some(cross_entropy(tape, c.logits, &prep.pixel_labels)?);
        }
        if let (Some(p), Some(c)) = (points.f_pcam, points.f_cam) {
            parts.pixel_to_point = Some(pixel2point_loss(tape, p, c, &points.mask)?);
        }
        Ok(parts)
    }

    /// Forward and backward on one prepared sample; returns the losses and one gradient per parameter.
    pub fn gradients(&self, prep: &Prepared, weights: &LossWeights) -> Result<(StepLosses, Vec<Tensor>)> {
        let mut tape = Tape::new();
        let bind = self.params.bind(&mut tape)?;
        let scene = self.scene_stage(&mut tape, &bind, prep)?;
        let points = self.point_stage(&mut tape, &bind, &scene, &prep.devox, &prep.projection, prep.input_size)?;
        let parts = self.losses(&mut tape, &scene, &points, prep)?;
        let total = total_loss(&mut tape, &parts, weights)?;
        let value = |v: Option<Var>| v.map(|v| tape.value(v).data()[0]);
        let losses = StepLosses {
            total: tape.value(total).data()[0],
            point: value(parts.point),
            point_to_voxel: value(parts.point_to_voxel),
            point_to_pixel: value(parts.point_to_pixel),
            pixel_to_point: value(parts.pixel_to_point),
        };
        if !losses.total.is_finite() {
            return Err(Error::Numerical(format!("loss is {}", losses.total)));
        }
        let grads = tape.backward(total)?;
        Ok((losses, self.params.collect_grads(&bind, &grads)))
    }

    /// Class scores for the prepared points, computed `chunk` points at a time.
    pub fn logits(&self, prep: &Prepared, chunk: usize) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bind = self.params.bind_frozen(&mut tape)?;
        let scene = self.scene_stage(&mut tape, &bind, prep)?;
        let n = prep.projection.len();
        let k = self.config.num_classes;
        let mut out = Vec::with_capacity(n * k);
        let chunk = chunk.max(1);
        let shared_voxels = tape.value(scene.voxels).clone();
        let shared_rows = scene.image_rows.map(|r| tape.value(r).clone());
        let shared_embeddings: Vec<Tensor> = scene.embeddings.iter().map(|&e| tape.value(e).clone()).collect();
        drop(tape);
        for start in (0..n).step_by(chunk) {
            let rows: Vec<usize> = (start..(start + chunk).min(n)).collect();
            let mut tape = Tape::new();
            let bind = self.params.bind_frozen(&mut tape)?;
            let local = SceneFeatures {
                voxels: tape.constant(shared_voxels.clone())?,
                image_rows: shared_rows.clone().map(|r| tape.constant(r)).transpose()?,
                embeddings: shared_embeddings.iter().map(|e| tape.constant(e.clone())).collect::<Result<_>>()?,
                lidar_sfam: None,
                camera_sfam: None,
                self_attention: Vec::new(),
                ..scene.clone()
            };
            let devox = prep.devox.select_rows(&rows);
            let proj = prep.projection.select(&rows);
            let p = self.point_stage(&mut tape, &bind, &local, &devox, &proj, prep.input_size)?;
            out.extend_from_slice(tape.value(p.logits).data());
        }
        Tensor::new(vec![n, k], out)
    }

    /// Most likely class per point, never the ignored one.
    pub fn predict(&self, prep: &Prepared, chunk: usize) -> Result<Vec<usize>> {
        let logits = self.logits(prep, chunk)?;
        Ok((0..logits.rows())
            .map(|i| {
                let row = logits.row(i);
                (0..row.len())
                    .filter(|&c| c != IGNORE)
                    .fold(None, |best: Option<usize>, c| match best {
                        Some(b) if row[b] >= row[c] => Some(b),
                        _ => Some(c),
                    })
                    .unwrap_or(0)
            })
            .collect())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let meta = CheckpointMeta { model: self.config.clone(), toggles: self.toggles.clone() };
        self.params.save(dir, serde_json::to_value(meta)?)
    }

    /// Rebuilds the network described by `config`/`toggles` and fills it from `dir`.
    /// Eval-time toggles (frames, broken cameras) may differ from training.
    pub fn load(dir: &Path, config: ModelConfig, toggles: Toggles) -> Result<Self> {
        let mut model = Self::new(config, toggles, 0)?;
        let meta = model.params.load_into(dir)?;
        let meta: CheckpointMeta =
            serde_json::from_value(meta).map_err(|e| Error::Config(format!("checkpoint metadata: {e}")))?;
        if meta.model != model.config || !meta.toggles.same_architecture(&model.toggles) {
            return Err(Error::Config("checkpoint was trained with a different model configuration".into()));
        }
        Ok(model)
    }
}
