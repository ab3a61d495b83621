use std::f64::consts::FRAC_PI_4;

use proptest::prelude::*;

use super::*;
use crate::scene::{generate_scene, paint_check, PaintReport, Sample, SceneSpec};

fn sample(seed: u64, size: usize) -> Sample {
    let spec = SceneSpec { num_points: 3000, image_height: size, image_width: size, ..SceneSpec::default() };
    generate_scene(seed, &spec).unwrap().sample(1).unwrap()
}

fn paint(s: &Sample) -> PaintReport {
    paint_check(&s.cloud, &s.projection, &s.images)
}

fn step(scope: Scope, transform: Transform) -> Step {
    Step { scope, transform }
}

#[test]
fn plans_are_deterministic_and_seed_dependent() {
    let cfg = AugmentConfig::default();
    let a = sample_plan(5, &cfg, 5, 64, 64).unwrap();
    assert_eq!(a, sample_plan(5, &cfg, 5, 64, 64).unwrap());
    assert_ne!(a, sample_plan(6, &cfg, 5, 64, 64).unwrap());
    let json = serde_json::to_string(&a).unwrap();
    assert_eq!(serde_json::from_str::<AugmentationPlan>(&json).unwrap(), a);
}

#[test]
fn disabled_config_gives_identity() {
    let plan = sample_plan(1, &AugmentConfig::disabled(), 5, 64, 64).unwrap();
    assert!(plan.is_identity());
    let mut s = sample(1, 64);
    let before = s.clone();
    apply_plan(&mut s, &plan).unwrap();
    assert_eq!(s, before);
}

#[test]
fn invalid_ranges_are_config_errors() {
    let bad = [
        AugmentConfig { scale_range: [1.1, 0.9], ..AugmentConfig::default() },
        AugmentConfig { camera_scale_range: [0.5, 1.0], ..AugmentConfig::default() },
        AugmentConfig { flip_prob: 1.5, ..AugmentConfig::default() },
        AugmentConfig { jpeg_quality: [70, 30], ..AugmentConfig::default() },
        AugmentConfig { translation_std: -1.0, ..AugmentConfig::default() },
    ];
    for cfg in bad {
        assert!(matches!(sample_plan(0, &cfg, 2, 8, 8), Err(crate::Error::Config(_))), "{cfg:?}");
    }
}

#[test]
fn sampled_parameters_stay_in_range() {
    let cfg = AugmentConfig::default();
    let (mut lo, mut hi) = (f64::MAX, f64::MIN);
    let mut flips = [0usize; 2];
    let mut jpegs = 0;
    let trials = 2000;
    for seed in 0..trials {
        let plan = sample_plan(seed, &cfg, 1, 32, 48).unwrap();
        for s in &plan.steps {
            match s.transform {
                Transform::Rotate { angle } => {
                    lo = lo.min(angle);
                    hi = hi.max(angle);
                }
                Transform::Scale { factor } => assert!((0.95..=1.05).contains(&factor)),
                Transform::Flip { x, y } => {
                    flips[0] += x as usize;
                    flips[1] += y as usize;
                }
                Transform::CameraAffine { scale, angle, offset } => {
                    assert!((1.0..=1.5).contains(&scale));
                    assert!(angle.abs() <= 1f64.to_radians());
                    assert!(offset[0] >= 0.0 && offset[0] <= (scale * 48.0).floor() - 48.0);
                    assert!(offset[1] >= 0.0 && offset[1] <= (scale * 32.0).floor() - 32.0);
                }
                Transform::ColorJitter { brightness, contrast, saturation, hue } => {
                    for f in [brightness, contrast, saturation] {
                        assert!((0.7..=1.3).contains(&f));
                    }
                    assert!(hue.abs() <= 0.1);
                }
                Transform::Jpeg { quality } => {
                    assert!((30..=70).contains(&quality));
                    jpegs += 1;
                }
                Transform::Translate { .. } => {}
            }
        }
    }
    assert!(lo >= -FRAC_PI_4 && hi <= FRAC_PI_4);
    assert!(lo < -0.97 * FRAC_PI_4 && hi > 0.97 * FRAC_PI_4, "range not covered: {lo} {hi}");
    for f in flips.into_iter().chain([jpegs]) {
        let p = f as f64 / trials as f64;
        assert!((p - 0.5).abs() < 0.05, "{p}");
    }
}

#[test]
fn lidar_transforms_leave_the_index_alone() {
    let mut s = sample(2, 64);
    let before = s.clone();
    for t in [
        Transform::Rotate { angle: 0.3 },
        Transform::Translate { offset: [0.2, -0.4, 0.1] },
        Transform::Scale { factor: 1.04 },
    ] {
        apply_step(&mut s, &step(Scope::Lidar, t)).unwrap();
    }
    assert_eq!(s.projection, before.projection);
    assert_eq!(s.images, before.images);
    assert_eq!(s.cloud.labels, before.cloud.labels);
    assert_ne!(s.cloud.positions, before.cloud.positions);
}

#[test]
fn scope_mismatch_is_rejected() {
    let mut s = sample(2, 64);
    let wrong = step(Scope::Lidar, Transform::Jpeg { quality: 50 });
    assert!(apply_step(&mut s, &wrong).is_err());
    let missing = step(Scope::Camera(9), Transform::Jpeg { quality: 50 });
    assert!(apply_step(&mut s, &missing).is_err());
}

#[test]
fn doubling_scale_doubles_pixel_coordinates() {
    let map = Affine2::camera(2.0, 0.0, [0.0, 0.0], 64, 64);
    assert_eq!(map.apply([10.0, 10.0]), [20.0, 20.0]);
    let crop = Affine2::camera(1.5, 0.0, [7.0, 3.0], 64, 64);
    assert_eq!(crop.apply([10.0, 10.0]), [8.0, 12.0]);
}

#[test]
fn camera_warp_drops_points_pushed_out_of_frame() {
    let mut s = sample(3, 64);
    let visible = s.projection.visible_count();
    let t = Transform::CameraAffine { scale: 1.5, angle: 0.0, offset: [0.0, 0.0] };
    apply_step(&mut s, &step(Scope::Camera(0), t)).unwrap();
    let after = s.projection.visible_count();
    assert!(after < visible);
    for p in s.projection.entries.iter().flatten() {
        assert!(p.u >= 0.0 && p.u < 64.0 && p.v >= 0.0 && p.v < 64.0);
    }
}

#[test]
fn double_flip_of_one_axis_is_identity() {
    let mut s = sample(4, 64);
    let before = s.clone();
    let t = step(Scope::Symmetric, Transform::Flip { x: false, y: true });
    apply_step(&mut s, &t).unwrap();
    assert_ne!(s.images, before.images);
    apply_step(&mut s, &t).unwrap();
    assert_eq!(s.images, before.images);
    assert_eq!(s.cloud, before.cloud);
    // Points in the strip past the last pixel center are lost on the first mirror.
    let kept = before.projection.entries.iter().zip(&s.projection.entries);
    for (a, b) in kept {
        if let Some(b) = b {
            let a = a.unwrap();
            assert_eq!((a.camera, a.v, a.depth), (b.camera, b.v, b.depth));
            assert!((a.u - b.u).abs() < 1e-12);
        }
    }
}

#[test]
fn paint_survives_every_geometric_augmentation() {
    let transforms = [
        step(Scope::Lidar, Transform::Rotate { angle: FRAC_PI_4 }),
        step(Scope::Lidar, Transform::Translate { offset: [0.5, -0.5, 0.2] }),
        step(Scope::Lidar, Transform::Scale { factor: 0.95 }),
        step(Scope::Symmetric, Transform::Flip { x: true, y: false }),
        step(Scope::Symmetric, Transform::Flip { x: true, y: true }),
    ];
    let mut base = PaintReport::default();
    let mut per = vec![PaintReport::default(); transforms.len() + 2];
    for seed in 0..3 {
        let s = sample(100 + seed, 256);
        base = base.merge(paint(&s));
        for (k, t) in transforms.iter().enumerate() {
            let mut a = s.clone();
            apply_step(&mut a, t).unwrap();
            per[k] = per[k].clone().merge(paint(&a));
        }
        for (k, (scale, angle)) in [(1.5, 1f64.to_radians()), (1.2, -1f64.to_radians())].into_iter().enumerate() {
            let mut a = s.clone();
            for c in 0..a.images.cameras {
                let offset = [11.0 + c as f64, 37.0];
                apply_step(&mut a, &step(Scope::Camera(c), Transform::CameraAffine { scale, angle, offset })).unwrap();
            }
            let i = transforms.len() + k;
            per[i] = per[i].clone().merge(paint(&a));
        }
    }
    assert!(base.fraction() >= 0.99, "baseline {}", base.fraction());
    for (k, r) in per.iter().enumerate() {
        assert!(r.checked > 1000);
        assert!(r.fraction() >= 0.99, "transform {k}: {}", r.fraction());
    }
}

proptest! {
    #[test]
    fn affine_inverse_round_trips(scale in 1.0f64..1.5, angle in -0.1f64..0.1, ox in 0.0f64..40.0, oy in 0.0f64..40.0,
                                  u in 0.0f64..128.0, v in 0.0f64..96.0) {
        let map = Affine2::camera(scale, angle, [ox, oy], 96, 128);
        let back = map.inverse().apply(map.apply([u, v]));
        prop_assert!((back[0] - u).abs() < 1e-9 && (back[1] - v).abs() < 1e-9);
    }

    #[test]
    fn lidar_motion_preserves_distances(angle in -1.0f64..1.0, t in prop::array::uniform3(-2.0f64..2.0),
                                        flip in any::<(bool, bool)>()) {
        let mut pts = vec![[1.0, 2.0, 0.5], [-3.0, 0.25, 1.0], [4.0, -1.0, -1.5]];
        let d = |p: &[[f64; 3]]| (0..3).map(|k| (p[0][k] - p[1][k]).powi(2)).sum::<f64>().sqrt();
        let before = d(&pts);
        rotate_points(&mut pts, angle);
        translate_points(&mut pts, t);
        flip_points(&mut pts, flip.0, flip.1);
        prop_assert!((d(&pts) - before).abs() < 1e-12);
    }
}
