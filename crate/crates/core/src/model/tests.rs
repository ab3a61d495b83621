use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::backbone::BackboneConfig;
use crate::fusion::FusionConfig;
use crate::scene::{generate_scene, SceneSpec, IGNORE};
use crate::supervision::LossWeights;

fn small_spec() -> SceneSpec {
    SceneSpec { num_points: 600, image_height: 32, image_width: 32, azimuth_steps: 360, ..SceneSpec::default() }
}

fn small_config() -> ModelConfig {
    ModelConfig {
        voxel_size: 0.5,
        backbone: BackboneConfig { voxel_width: 8, image_width: 8, stride: 4, rounds: 1, levels: vec![4] },
        fusion: FusionConfig { inter_width: 8, gfused_width: 8, sfused_width: 8, heads: 2, blocks: 2 },
        ..ModelConfig::default()
    }
}

fn prepared(toggles: &Toggles, points: usize) -> Prepared {
    let scene = generate_scene(3, &small_spec()).unwrap();
    let sample = scene.sample(1).unwrap();
    let n = sample.cloud.len();
    let selected: Vec<usize> = (0..points.min(n)).map(|i| i * n / points.min(n)).collect();
    prepare(&sample, &small_config(), toggles, &selected).unwrap()
}

#[test]
fn each_variant_reports_its_own_losses() {
    for v in Variant::ALL {
        let toggles = Toggles::variant(v);
        let model = Model::new(small_config(), toggles.clone(), 1).unwrap();
        let prep = prepared(&toggles, 80);
        let (losses, grads) = model.gradients(&prep, &LossWeights::default()).unwrap();
        assert!(losses.total.is_finite() && losses.total > 0.0, "{v:?}");
        assert!(losses.point.is_some());
        assert_eq!(losses.point_to_voxel.is_some(), toggles.use_sf_phase, "{v:?}");
        assert_eq!(losses.point_to_pixel.is_some(), toggles.use_sf_phase, "{v:?}");
        assert_eq!(losses.pixel_to_point.is_some(), toggles.use_pixel2point, "{v:?}");
        assert_eq!(grads.len(), model.params.len());
        assert!(grads.iter().all(|g| g.is_finite()));
        // Every parameter of the built network receives some signal.
        for (id, g) in model.params.ids().zip(&grads) {
            assert!(g.data().iter().any(|&x| x != 0.0), "{v:?}: {} has no gradient", model.params.name(id));
        }
    }
}

#[test]
fn lidar_only_is_smaller_than_full() {
    let lidar = Model::new(small_config(), Toggles::variant(Variant::LidarOnly), 0).unwrap();
    let full = Model::new(small_config(), Toggles::variant(Variant::Full), 0).unwrap();
    assert!(lidar.params.scalar_count() < full.params.scalar_count());
}

#[test]
fn invalid_toggles_are_config_errors() {
    let toggles = Toggles { use_camera: false, ..Toggles::default() };
    assert!(matches!(Model::new(small_config(), toggles, 0), Err(crate::Error::Config(_))));
}

#[test]
fn total_loss_gradient_matches_directional_difference() {
    // The completion paths stop gradients on purpose, so they are left out here.
    let toggles = Toggles { use_pixel2point: false, use_completion: false, ..Toggles::variant(Variant::Full) };
    let mut model = Model::new(small_config(), toggles.clone(), 5).unwrap();
    let prep = prepared(&toggles, 40);
    let weights = LossWeights::default();
    let (_, grads) = model.gradients(&prep, &weights).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..3 {
        let dir: Vec<Vec<f64>> =
            grads.iter().map(|g| (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let analytic: f64 = grads.iter().zip(&dir).map(|(g, d)| g.data().iter().zip(d).map(|(a, b)| a * b).sum::<f64>()).sum();
        let h = 1e-6;
        let at = |s: f64, model: &mut Model| {
            for (t, d) in model.params.tensors_mut().iter_mut().zip(&dir) {
                t.data_mut().iter_mut().zip(d).for_each(|(x, y)| *x += s * y);
            }
            model.gradients(&prep, &weights).unwrap().0.total
        };
        let plus = at(h, &mut model);
        let minus = at(-2.0 * h, &mut model);
        at(h, &mut model);
        let numeric = (plus - minus) / (2.0 * h);
        let rel = (numeric - analytic).abs() / analytic.abs().max(1e-6);
        assert!(rel < 1e-4, "numeric {numeric} analytic {analytic}");
    }
}

#[test]
fn pseudo_camera_learns_only_from_the_completion_loss() {
    let toggles = Toggles::variant(Variant::Full);
    let model = Model::new(small_config(), toggles.clone(), 5).unwrap();
    let prep = prepared(&toggles, 120);
    assert!(prep.projection.mask().iter().any(|&m| !m));
    let weights = LossWeights { pixel_to_point: 0.0, ..LossWeights::default() };
    let (_, grads) = model.gradients(&prep, &weights).unwrap();
    let mut seen = 0;
    for (id, g) in model.params.ids().zip(&grads) {
        if model.params.name(id).starts_with("pcam") {
            seen += 1;
            assert!(g.data().iter().all(|&x| x == 0.0), "{}", model.params.name(id));
        }
    }
    assert!(seen > 0);
}

#[test]
fn chunked_prediction_matches_single_pass() {
    let toggles = Toggles::variant(Variant::Full);
    let model = Model::new(small_config(), toggles.clone(), 2).unwrap();
    let prep = prepared(&toggles, 200);
    let whole = model.logits(&prep, usize::MAX).unwrap();
    let chunked = model.logits(&prep, 7).unwrap();
    assert_eq!(whole.shape(), &[200, 8]);
    assert!(whole.max_abs_diff(&chunked) < 1e-12);
    let pred = model.predict(&prep, 64).unwrap();
    assert_eq!(pred.len(), 200);
    assert!(pred.iter().all(|&c| c != IGNORE && c < 8));
}

#[test]
fn checkpoint_round_trip_keeps_predictions() {
    let toggles = Toggles::variant(Variant::Completion);
    let model = Model::new(small_config(), toggles.clone(), 4).unwrap();
    let prep = prepared(&toggles, 100);
    let dir = tempfile::tempdir().unwrap();
    model.save(dir.path()).unwrap();
    let back = Model::load(dir.path(), small_config(), toggles.clone()).unwrap();
    assert_eq!(model.logits(&prep, 50).unwrap(), back.logits(&prep, 50).unwrap());

    let other = Toggles::variant(Variant::Full);
    assert!(matches!(Model::load(dir.path(), small_config(), other), Err(crate::Error::Config(_))));
    let wider = ModelConfig { voxel_size: 0.3, ..small_config() };
    assert!(matches!(Model::load(dir.path(), wider, toggles), Err(crate::Error::Config(_))));
}

#[test]
fn dropped_cameras_black_out_images_and_hits() {
    let toggles = Toggles { dropped_cameras: vec![0, 2], ..Toggles::default() };
    let prep = prepared(&toggles, 600);
    let images = prep.images.as_ref().unwrap();
    let plane = 3 * 32 * 32;
    assert!(images.data()[..plane].iter().all(|&v| v == 0.0));
    assert!(images.data()[plane..2 * plane].iter().any(|&v| v != 0.0));
    for i in 0..prep.projection.len() {
        if let Some(hit) = prep.projection.get(i) {
            assert!(hit.camera != 0 && hit.camera != 2);
        }
    }
    let bad = Toggles { dropped_cameras: vec![5], ..Toggles::default() };
    let scene = generate_scene(3, &small_spec()).unwrap();
    let sample = scene.sample(1).unwrap();
    assert!(prepare(&sample, &small_config(), &bad, &[0]).is_err());
}

#[test]
fn completion_fills_every_point_when_all_cameras_drop() {
    let toggles = Toggles { dropped_cameras: (0..5).collect(), ..Toggles::variant(Variant::Completion) };
    let model = Model::new(small_config(), toggles.clone(), 6).unwrap();
    let prep = prepared(&toggles, 50);
    let mut tape = crate::tensor::Tape::new();
    let bind = model.params.bind(&mut tape).unwrap();
    let scene = model.scene_stage(&mut tape, &bind, &prep).unwrap();
    let out = model.point_stage(&mut tape, &bind, &scene, &prep.devox, &prep.projection, prep.input_size).unwrap();
    assert!(out.mask.iter().all(|&m| !m));
    let cam = tape.value(out.f_cam.unwrap());
    assert!(cam.data().iter().all(|&v| v == 0.0));
    assert!(tape.value(out.f_pcam.unwrap()).data().iter().any(|&v| v != 0.0));
}
