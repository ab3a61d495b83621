use super::classes::*;
use super::*;
use crate::error::Error;
use crate::geometry::CameraRig;

fn small_spec() -> SceneSpec {
    SceneSpec {
        num_points: 3000,
        image_height: 64,
        image_width: 64,
        ..SceneSpec::default()
    }
}

#[test]
fn generation_is_deterministic() {
    let a = generate_scene(17, &small_spec()).unwrap();
    let b = generate_scene(17, &small_spec()).unwrap();
    assert_eq!(a, b);
    let c = generate_scene(18, &small_spec()).unwrap();
    assert_ne!(a.cloud, c.cloud);
}

#[test]
fn labels_and_counts_follow_the_spec() {
    let spec = small_spec();
    let targets = spec.class_targets();
    assert_eq!(targets.iter().sum::<usize>(), spec.num_points);
    let mut hist = [0usize; NUM_CLASSES];
    for seed in 0..10 {
        let s = generate_scene(seed, &spec).unwrap();
        assert_eq!(s.cloud.len(), spec.num_points);
        for &l in &s.cloud.labels {
            hist[l] += 1;
        }
    }
    let total: usize = hist.iter().sum();
    for c in 0..NUM_CLASSES {
        let frac = hist[c] as f64 / total as f64;
        assert!((frac - spec.class_proportions[c]).abs() < 0.05, "class {c}: {frac}");
    }
}

#[test]
fn save_load_round_trip_is_exact() {
    let s = generate_sequence(3, &small_spec(), 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    s.save(dir.path()).unwrap();
    let back = SceneBundle::load(dir.path()).unwrap();
    assert_eq!(back, s);
    assert_eq!(back.history.len(), 2);
}

#[test]
fn paint_check_passes_on_generated_scenes() {
    let spec = SceneSpec { num_points: 4000, ..SceneSpec::default() };
    let mut total = PaintReport::default();
    for seed in 0..4 {
        let s = generate_scene(seed, &spec).unwrap();
        let report = paint_check(&s.cloud, &s.projection().unwrap(), &s.images);
        assert!(report.checked > 2000);
        assert!(report.fraction() >= 0.97, "seed {seed}: {report:?}");
        total = total.merge(report);
    }
    assert!(total.fraction() >= 0.99, "{total:?}");
}

#[test]
fn single_object_facing_single_camera_is_fully_visible() {
    let spec = SceneSpec {
        num_points: 500,
        num_cameras: 1,
        camera_coverage_deg: 60.0,
        class_proportions: vec![0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0],
        image_height: 64,
        image_width: 64,
        ..SceneSpec::default()
    };
    let car = Object {
        class: VEHICLE,
        shape: Shape::Box { center: [10.0, 0.0, -1.05], half: [2.0, 1.0, 0.75], yaw: 0.3 },
    };
    let s = generate_scene_with_objects(1, &spec, vec![car]).unwrap();
    let proj = s.projection().unwrap();
    let vehicle_points: Vec<usize> = (0..s.cloud.len()).filter(|&i| s.cloud.labels[i] == VEHICLE).collect();
    assert_eq!(vehicle_points.len(), 250);
    assert!(vehicle_points.iter().all(|&i| proj.entries[i].is_some()));
}

#[test]
fn uncovered_wedge_points_are_masked() {
    let s = generate_scene(9, &small_spec()).unwrap();
    let proj = s.projection().unwrap();
    let mut wedge = 0;
    for (p, e) in s.cloud.positions.iter().zip(&proj.entries) {
        let az = p[1].atan2(p[0]).to_degrees().rem_euclid(360.0);
        if (271.0..329.0).contains(&az) {
            wedge += 1;
            assert!(e.is_none());
        }
    }
    assert!(wedge > 0);
}

#[test]
fn empty_world_renders_background() {
    let rig = CameraRig::ring(2, 2.0, [0.0; 3], 0.5, 16, 16).unwrap();
    let world = World { ground_z: -1e9, objects: vec![] };
    let im = render_images(&world, &rig);
    assert!(im.data.chunks(16 * 16).enumerate().all(|(k, ch)| ch.iter().all(|&v| v == BACKGROUND[k % 3])));
}

#[test]
fn sphere_on_axis_renders_centered_disc() {
    let rig = CameraRig::ring(1, 1.0, [0.0; 3], 0.0, 33, 33).unwrap();
    let world = World {
        ground_z: -1e9,
        objects: vec![Object { class: SPHERE, shape: Shape::Sphere { center: [10.0, 0.0, 0.0], radius: 1.5 } }],
    };
    let im = render_images(&world, &rig);
    let cam = &rig.cameras[0];
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for y in 0..33 {
        for x in 0..33 {
            if classify_color(im.pixel(0, y, x)) == Some(SPHERE) {
                sx += x as f64;
                sy += y as f64;
                n += 1.0;
            }
        }
    }
    assert!(n > 20.0);
    assert!((sx / n - cam.cx).abs() < 1e-9 && (sy / n - cam.cy).abs() < 1e-9);
}

#[test]
fn infeasible_layouts_fail_cleanly() {
    let spec = SceneSpec {
        min_radius: 5.0,
        max_radius: 6.0,
        objects: ObjectCounts { building: 30, ..ObjectCounts::default() },
        ..small_spec()
    };
    assert!(matches!(generate_scene(0, &spec), Err(Error::Generation(_))));
    let spec = SceneSpec { class_proportions: vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], ..small_spec() };
    assert!(matches!(generate_scene(0, &spec), Err(Error::Config(_))));
}

#[test]
fn collapsed_sample_keeps_current_sweep_first() {
    let s = generate_sequence(5, &small_spec(), 3).unwrap();
    let sample = s.sample(3).unwrap();
    assert_eq!(sample.cloud.len(), 3 * s.cloud.len());
    assert_eq!(&sample.cloud.positions[..s.cloud.len()], &s.cloud.positions[..]);
    assert_eq!(sample.current_mask().iter().filter(|&&m| m).count(), s.cloud.len());
    assert!(s.sample(4).is_err());
    // Earlier sweeps were taken from elsewhere, so only the current one must paint.
    let current: Vec<usize> = (0..s.cloud.len()).collect();
    let report = paint_check(&s.cloud, &sample.projection.select(&current), &sample.images);
    assert!(report.fraction() >= 0.97, "{report:?}");
}

