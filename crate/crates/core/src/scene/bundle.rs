use std::path::Path;

use nalgebra::Isometry3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    collapse_frames, pose_from_record, pose_to_record, project_points, CameraRecord, CameraRig, Frame, PointCloud,
    ProjectionIndex,
};
use crate::store::{read_bundle, write_bundle, Array, Bundle};
use crate::tensor::Tensor;

/// Camera images, `[N_cam, 3, H, W]` RGB in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageStack {
    pub cameras: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl ImageStack {
    pub fn filled(cameras: usize, height: usize, width: usize, rgb: [f32; 3]) -> Self {
        let mut data = vec![0.0; cameras * 3 * height * width];
        for c in 0..cameras {
            for (ch, &v) in rgb.iter().enumerate() {
                let start = (c * 3 + ch) * height * width;
                data[start..start + height * width].fill(v);
            }
        }
        Self { cameras, height, width, data }
    }

    fn offset(&self, camera: usize, ch: usize, y: usize, x: usize) -> usize {
        ((camera * 3 + ch) * self.height + y) * self.width + x
    }

    pub fn pixel(&self, camera: usize, y: usize, x: usize) -> [f32; 3] {
        [0, 1, 2].map(|ch| self.data[self.offset(camera, ch, y, x)])
    }

    pub fn set_pixel(&mut self, camera: usize, y: usize, x: usize, rgb: [f32; 3]) {
        for (ch, v) in rgb.into_iter().enumerate() {
            let o = self.offset(camera, ch, y, x);
            self.data[o] = v;
        }
    }

    /// One camera's `[3, H, W]` plane.
    pub fn camera(&self, camera: usize) -> &[f32] {
        let n = 3 * self.height * self.width;
        &self.data[camera * n..(camera + 1) * n]
    }

    pub fn camera_mut(&mut self, camera: usize) -> &mut [f32] {
        let n = 3 * self.height * self.width;
        &mut self.data[camera * n..(camera + 1) * n]
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(
            vec![self.cameras, 3, self.height, self.width],
            self.data.iter().map(|&v| f64::from(v)).collect(),
        )
        .expect("consistent by construction")
    }

    /// Nearest pixel to full-resolution coordinates, clamped to the image.
    pub fn nearest_pixel(&self, u: f64, v: f64) -> (usize, usize) {
        let x = (u.round().max(0.0) as usize).min(self.width - 1);
        let y = (v.round().max(0.0) as usize).min(self.height - 1);
        (y, x)
    }
}

/// One multi-sensor sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneBundle {
    pub id: String,
    pub seed: u64,
    /// Current sweep in the sensor frame.
    pub cloud: PointCloud,
    pub images: ImageStack,
    pub rig: CameraRig,
    /// Sensor-to-world pose of the current sweep.
    pub ego_pose: Isometry3<f64>,
    /// Earlier sweeps, most recent first, each with its own sensor-to-world pose.
    pub history: Vec<Frame>,
}

/// Model-ready view of a scene: possibly several sweeps collapsed into the
/// current sensor frame, with the projection computed before any augmentation.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub cloud: PointCloud,
    /// 0 for points of the current sweep.
    pub frame_of: Vec<usize>,
    pub images: ImageStack,
    pub projection: ProjectionIndex,
}

impl Sample {
    pub fn current_mask(&self) -> Vec<bool> {
        self.frame_of.iter().map(|&f| f == 0).collect()
    }
}

impl SceneBundle {
    pub fn projection(&self) -> Result<ProjectionIndex> {
        project_points(&self.cloud.positions, &self.rig)
    }

    /// Collapses the current sweep and up to `frames - 1` earlier ones.
    pub fn sample(&self, frames: usize) -> Result<Sample> {
        if frames == 0 {
            return Err(Error::InvalidArgument("frame count must be at least 1".into()));
        }
        if frames - 1 > self.history.len() {
            return Err(Error::InvalidArgument(format!(
                "{frames} frames requested but the scene stores {} earlier sweeps",
                self.history.len()
            )));
        }
        let mut sweeps = vec![Frame { cloud: self.cloud.clone(), pose: self.ego_pose }];
        sweeps.extend(self.history[..frames - 1].iter().cloned());
        let collapsed = collapse_frames(&sweeps, &self.ego_pose)?;
        let projection = project_points(&collapsed.cloud.positions, &self.rig)?;
        Ok(Sample {
            cloud: collapsed.cloud,
            frame_of: collapsed.frame_of,
            images: self.images.clone(),
            projection,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let (rotation, translation) = pose_to_record(&self.ego_pose);
        let meta = SceneMeta {
            id: self.id.clone(),
            seed: self.seed,
            rig: self.rig.to_record(),
            ego_pose: PoseRecord { rotation, translation },
            history_poses: self
                .history
                .iter()
                .map(|f| {
                    let (rotation, translation) = pose_to_record(&f.pose);
                    PoseRecord { rotation, translation }
                })
                .collect(),
        };
        let mut b = Bundle::new(serde_json::to_value(meta)?);
        put_cloud(&mut b, "", &self.cloud);
        for (k, f) in self.history.iter().enumerate() {
            put_cloud(&mut b, &format!("history{k}_"), &f.cloud);
        }
        let im = &self.images;
        b.insert("images", Array::f32(vec![im.cameras, 3, im.height, im.width], im.data.clone()));
        write_bundle(dir, "scene", &b)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mut b = read_bundle(dir, "scene")?;
        let meta: SceneMeta = serde_json::from_value(b.meta.clone())?;
        let rig = CameraRig::from_record(&meta.rig)?;
        let cloud = take_cloud(&mut b, "")?;
        let mut history = Vec::new();
        for (k, p) in meta.history_poses.iter().enumerate() {
            history.push(Frame {
                cloud: take_cloud(&mut b, &format!("history{k}_"))?,
                pose: pose_from_record(&p.rotation, &p.translation)?,
            });
        }
        let (shape, data) = b.take_f32("images")?;
        let [cameras, 3, height, width] = shape[..] else {
            return Err(Error::Manifest(format!("images must be [N, 3, H, W], got {shape:?}")));
        };
        if cameras != rig.len() || (height, width) != rig.image_size() {
            return Err(Error::Manifest("image stack does not match the rig".into()));
        }
        Ok(Self {
            id: meta.id,
            seed: meta.seed,
            cloud,
            images: ImageStack { cameras, height, width, data },
            rig,
            ego_pose: pose_from_record(&meta.ego_pose.rotation, &meta.ego_pose.translation)?,
            history,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PoseRecord {
    rotation: [f64; 4],
    translation: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct SceneMeta {
    id: String,
    seed: u64,
    rig: Vec<CameraRecord>,
    ego_pose: PoseRecord,
    history_poses: Vec<PoseRecord>,
}

fn put_cloud(b: &mut Bundle, prefix: &str, c: &PointCloud) {
    let n = c.len();
    let pos = c.positions.iter().flatten().map(|&v| v as f32).collect();
    b.insert(&format!("{prefix}positions"), Array::f32(vec![n, 3], pos));
    let attrs = c.attributes.iter().map(|&v| v as f32).collect();
    b.insert(&format!("{prefix}attributes"), Array::f32(vec![n, c.attribute_width], attrs));
    let labels = c.labels.iter().map(|&l| l as i32).collect();
    b.insert(&format!("{prefix}labels"), Array::i32(vec![n], labels));
}

fn take_cloud(b: &mut Bundle, prefix: &str) -> Result<PointCloud> {
    let (ps, pos) = b.take_f32(&format!("{prefix}positions"))?;
    let (as_, attrs) = b.take_f32(&format!("{prefix}attributes"))?;
    let (_, labels) = b.take_i32(&format!("{prefix}labels"))?;
    if ps.len() != 2 || ps[1] != 3 || as_.len() != 2 {
        return Err(Error::Manifest("point arrays must be two-dimensional".into()));
    }
    if labels.iter().any(|&l| l < 0) {
        return Err(Error::Manifest("negative label".into()));
    }
    PointCloud::new(
        pos.chunks_exact(3).map(|p| [p[0], p[1], p[2]].map(f64::from)).collect(),
        attrs.into_iter().map(f64::from).collect(),
        as_[1],
        labels.into_iter().map(|l| l as usize).collect(),
    )
}
