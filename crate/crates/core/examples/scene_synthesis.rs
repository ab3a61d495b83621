//! Generates one scene, reports its class mix, checks that LiDAR points pick up
//! the color of their class in the camera images, and round-trips it through disk.

use fuseg3d::scene::{generate_scene, paint_check, SceneBundle, SceneSpec, CLASS_NAMES};

fn main() -> fuseg3d::Result<()> {
    let spec = SceneSpec::default();
    let scene = generate_scene(42, &spec)?;
    println!("{}: {} points, {} cameras at {}x{}", scene.id, scene.cloud.len(), scene.images.cameras, scene.images.width, scene.images.height);

    let mut counts = vec![0usize; CLASS_NAMES.len()];
    for &l in &scene.cloud.labels {
        counts[l] += 1;
    }
    for (name, n) in CLASS_NAMES.iter().zip(&counts) {
        println!("  {name:<9} {:>5.1}%", 100.0 * *n as f64 / scene.cloud.len() as f64);
    }

    let projection = scene.projection()?;
    let report = paint_check(&scene.cloud, &projection, &scene.images);
    println!("{} points visible in a camera, {:.2}% painted with their class color", report.checked, 100.0 * report.fraction());

    let dir = std::env::temp_dir().join("fuseg3d_scene_example");
    scene.save(&dir)?;
    let back = SceneBundle::load(&dir)?;
    println!("saved to {} and reloaded identically: {}", dir.display(), back == scene);
    Ok(())
}
