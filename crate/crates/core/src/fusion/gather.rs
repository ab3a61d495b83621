use crate::error::{Error, Result};
use crate::geometry::ProjectionIndex;
use crate::tensor::{bilinear_taps, SparseRows, Tape, Var};

/// Flattens `[N_cam, C, H, W]` maps to `[N_cam * H * W, C]` rows, camera-major then raster order.
pub fn image_rows(tape: &mut Tape, maps: Var) -> Result<Var> {
    let shape = tape.value(maps).shape().to_vec();
    let [n, c, h, w] = shape[..] else {
        return Err(Error::shape("image_rows", format!("expected [N, C, H, W], got {shape:?}")));
    };
    let x = tape.permute(maps, &[0, 2, 3, 1])?;
    tape.reshape(x, &[n * h * w, c])
}

/// Bilinear sampling operator from image rows to points.
///
/// Visible points sample camera `c` at `(u * W / W_in, v * H / H_in)`, clamped
/// into the feature map; other points get an empty row (zero features).
pub fn sampling_rows(
    projection: &ProjectionIndex,
    cameras: usize,
    feature_size: (usize, usize),
    input_size: (usize, usize),
) -> Result<SparseRows> {
    let (h, w) = feature_size;
    let (h_in, w_in) = input_size;
    let mut s = SparseRows::new(cameras * h * w);
    for e in &projection.entries {
        match e {
            Some(p) => {
                if p.camera >= cameras {
                    return Err(Error::InvalidArgument(format!(
                        "projection refers to camera {} of {cameras}",
                        p.camera
                    )));
                }
                let u = (p.u * w as f64 / w_in as f64).clamp(0.0, (w - 1) as f64);
                let v = (p.v * h as f64 / h_in as f64).clamp(0.0, (h - 1) as f64);
                let base = p.camera * h * w;
                let taps = bilinear_taps(h, w, u, v)?;
                s.push_row(taps.map(|(r, c, wt)| (base + r * w + c, wt)));
            }
            None => s.push_row([]),
        }
    }
    Ok(s)
}

/// Point-wise features of both modalities.
#[derive(Clone, Debug)]
pub struct PointFeatures {
    /// `[N_point, C_voxel]`, devoxelized.
    pub lidar: Var,
    /// `[N_point, C_img]`, zero rows outside every camera.
    pub camera: Var,
    /// Whether each point has a camera hit.
    pub mask: Vec<bool>,
}

/// Devoxelizes voxel features with `devox` and samples image features at each point's pixel.
pub fn gather_point_features(
    tape: &mut Tape,
    voxel_feats: Var,
    devox: &SparseRows,
    image_feats: Var,
    projection: &ProjectionIndex,
    input_size: (usize, usize),
) -> Result<PointFeatures> {
    if devox.rows() != projection.len() {
        return Err(Error::shape(
            "gather_point_features",
            format!("{} devoxelized points, {} projections", devox.rows(), projection.len()),
        ));
    }
    let shape = tape.value(image_feats).shape().to_vec();
    let [cameras, _, h, w] = shape[..] else {
        return Err(Error::shape("gather_point_features", format!("image features {shape:?}")));
    };
    let lidar = tape.sparse_mix(voxel_feats, devox.clone())?;
    let rows = image_rows(tape, image_feats)?;
    let camera = tape.sparse_mix(rows, sampling_rows(projection, cameras, (h, w), input_size)?)?;
    Ok(PointFeatures { lidar, camera, mask: projection.mask() })
}

/// Keeps camera rows where `mask` holds and takes pseudo-camera rows elsewhere.
pub fn complete_features(tape: &mut Tape, f_cam: Var, f_pcam: Var, mask: &[bool]) -> Result<Var> {
    tape.row_select(f_cam, f_pcam, mask.to_vec())
}
