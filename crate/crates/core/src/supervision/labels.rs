use crate::geometry::ProjectionIndex;
use crate::scene::IGNORE;

/// Label of each voxel: the shared label of its points, or the ignore id when they disagree.
pub fn point_to_voxel_labels(labels: &[usize], point_voxel: &[usize], voxels: usize) -> Vec<usize> {
    let mut out: Vec<Option<usize>> = vec![None; voxels];
    let mut mixed = vec![false; voxels];
    for (&l, &v) in labels.iter().zip(point_voxel) {
        match out[v] {
            None => out[v] = Some(l),
            Some(prev) if prev != l => mixed[v] = true,
            Some(_) => {}
        }
    }
    out.into_iter()
        .zip(mixed)
        .map(|(l, m)| if m { IGNORE } else { l.unwrap_or(IGNORE) })
        .collect()
}

/// Sparse `[N_cam, H, W]` label map at feature resolution, flattened camera-major.
///
/// Each visible point writes its label at the nearest feature cell of its
/// scaled pixel coordinates. When several points land on one cell the one
/// closest to the camera wins, then the lower point index.
pub fn point_to_pixel_labels(
    labels: &[usize],
    projection: &ProjectionIndex,
    cameras: usize,
    size: (usize, usize),
    input_size: (usize, usize),
) -> Vec<usize> {
    let (h, w) = size;
    let (h_in, w_in) = input_size;
    let (sy, sx) = (h as f64 / h_in as f64, w as f64 / w_in as f64);
    let mut out = vec![IGNORE; cameras * h * w];
    let mut depth = vec![f64::INFINITY; cameras * h * w];
    for (i, e) in projection.entries.iter().enumerate() {
        let Some(p) = e else { continue };
        let x = ((p.u * sx).round().max(0.0) as usize).min(w - 1);
        let y = ((p.v * sy).round().max(0.0) as usize).min(h - 1);
        let cell = (p.camera * h + y) * w + x;
        if p.depth < depth[cell] {
            depth[cell] = p.depth;
            out[cell] = labels[i];
        }
    }
    out
}
