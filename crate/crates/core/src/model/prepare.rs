use crate::backbone::VoxelInput;
use crate::error::{Error, Result};
use crate::geometry::{voxelize, ProjectionIndex};
use crate::scene::Sample;
use crate::supervision::{point_to_pixel_labels, point_to_voxel_labels};
use crate::tensor::{SparseRows, Tensor};

use super::{ModelConfig, Toggles};

/// Everything one forward pass needs from a sample, with broken cameras applied.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub voxels: VoxelInput,
    pub voxel_labels: Vec<usize>,
    /// Devoxelization operator for the selected points.
    pub devox: SparseRows,
    pub projection: ProjectionIndex,
    pub labels: Vec<usize>,
    pub positions: Vec<[f64; 3]>,
    /// `[N_cam, 3, H_in, W_in]`, present when the model uses cameras.
    pub images: Option<Tensor>,
    /// Feature-resolution pixel labels, camera-major.
    pub pixel_labels: Vec<usize>,
    pub input_size: (usize, usize),
}

/// Voxelizes the whole sample and keeps the point-level inputs of `selected`.
pub fn prepare(sample: &Sample, cfg: &ModelConfig, toggles: &Toggles, selected: &[usize]) -> Result<Prepared> {
    let cloud = &sample.cloud;
    if cloud.is_empty() {
        return Err(Error::Empty("sample has no points"));
    }
    let images = &sample.images;
    if let Some(&c) = toggles.dropped_cameras.iter().find(|&&c| c >= images.cameras) {
        return Err(Error::InvalidArgument(format!("cannot drop camera {c} of a {}-camera rig", images.cameras)));
    }
    let feats = cloud.input_features(cfg.coord_scale);
    let vset = voxelize(&cloud.positions, &feats, cfg.voxel_size)?;
    let voxels = VoxelInput::new(&vset, cfg.coord_scale, &cfg.backbone.levels)?;
    let voxel_labels = point_to_voxel_labels(&cloud.labels, &vset.point_voxel, vset.len());
    let positions: Vec<[f64; 3]> = selected.iter().map(|&i| cloud.positions[i]).collect();
    let devox = vset.devoxel_weights(&positions)?;

    let mut full = sample.projection.clone();
    full.drop_cameras(&toggles.dropped_cameras);
    let input_size = (images.height, images.width);
    let (images, pixel_labels) = if toggles.use_camera {
        let s = cfg.backbone.stride;
        if images.height % s != 0 || images.width % s != 0 {
            return Err(Error::Config(format!(
                "image size {}x{} is not divisible by stride {s}",
                images.height, images.width
            )));
        }
        let mut t = images.to_tensor();
        let plane = 3 * images.height * images.width;
        for &c in &toggles.dropped_cameras {
            t.data_mut()[c * plane..(c + 1) * plane].fill(0.0);
        }
        let feature_size = (images.height / s, images.width / s);
        let labels = point_to_pixel_labels(&cloud.labels, &full, images.cameras, feature_size, input_size);
        (Some(t), labels)
    } else {
        (None, Vec::new())
    };
    Ok(Prepared {
        voxels,
        voxel_labels,
        devox,
        projection: full.select(selected),
        labels: selected.iter().map(|&i| cloud.labels[i]).collect(),
        positions,
        images,
        pixel_labels,
        input_size,
    })
}
