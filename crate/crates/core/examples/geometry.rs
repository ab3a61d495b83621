//! Projects a scan into the camera rig, voxelizes it and interpolates voxel
//! features back to the points.

use fuseg3d::geometry::{devoxelize, project_points, voxelize, DEFAULT_VOXEL_SIZE};
use fuseg3d::scene::{generate_scene, SceneSpec};

fn main() -> fuseg3d::Result<()> {
    let scene = generate_scene(7, &SceneSpec::default())?;
    let cloud = &scene.cloud;

    let projection = project_points(&cloud.positions, &scene.rig)?;
    let mut per_camera = vec![0usize; scene.rig.len()];
    for hit in projection.entries.iter().flatten() {
        per_camera[hit.camera] += 1;
    }
    println!("{} of {} points seen by a camera; per camera {per_camera:?}", projection.visible_count(), cloud.len());
    if let Some(hit) = projection.entries.iter().flatten().next() {
        println!("first hit: camera {} at (u {:.1}, v {:.1}), depth {:.2} m", hit.camera, hit.u, hit.v, hit.depth);
    }

    let features = cloud.input_features(0.1);
    let voxels = voxelize(&cloud.positions, &features, DEFAULT_VOXEL_SIZE)?;
    println!("{} points in {} voxels of {} m", cloud.len(), voxels.len(), voxels.voxel_size);

    // Interpolating the voxel means back to the points gives a smoothed copy.
    let back = devoxelize(&voxels, &voxels.features, &cloud.positions)?;
    let drift = (0..cloud.len())
        .map(|i| {
            let (a, b) = (features.row(i), back.row(i));
            ((0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>()).sqrt() / 0.1
        })
        .fold(0.0, f64::max);
    println!("largest distance between a point and its interpolated position: {drift:.3} m");
    Ok(())
}
