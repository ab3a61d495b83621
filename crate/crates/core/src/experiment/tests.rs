use super::*;
use crate::model::Variant;
use crate::scene::SceneSpec;

fn tiny() -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        seed: 11,
        corpus: CorpusConfig { train_scenes: 2, val_scenes: 1, sweeps: 2 },
        scene: SceneSpec { num_points: 500, image_height: 32, image_width: 32, azimuth_steps: 360, ..SceneSpec::default() },
        ..ExperimentConfig::default()
    };
    cfg.model.voxel_size = 0.5;
    cfg.model.backbone.voxel_width = 8;
    cfg.model.backbone.image_width = 8;
    cfg.model.fusion.inter_width = 8;
    cfg.model.fusion.gfused_width = 8;
    cfg.model.fusion.sfused_width = 8;
    cfg.model.fusion.heads = 2;
    cfg.model.fusion.blocks = 1;
    cfg.train.iterations = 3;
    cfg.train.points_per_scene = 64;
    cfg.ablate.seeds = vec![11];
    cfg.ablate.camera_drops = vec![];
    cfg.ablate.frame_counts = vec![];
    cfg
}

#[test]
fn derived_seeds_are_distinct_and_stable() {
    let a: Vec<u64> = (0..50).map(|i| derive_seed(7, 1, i)).collect();
    let b: Vec<u64> = (0..50).map(|i| derive_seed(7, 2, i)).collect();
    assert_eq!(a, (0..50).map(|i| derive_seed(7, 1, i)).collect::<Vec<_>>());
    let mut all: Vec<u64> = a.iter().chain(&b).copied().collect();
    all.sort_unstable();
    all.dedup();
    assert_eq!(all.len(), 100);
    assert_ne!(scene_seed(7, Split::Train, 0), scene_seed(7, Split::Val, 0));
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = tiny();
    let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::default());
}

#[test]
fn bad_configs_are_config_errors() {
    let cases = [
        "seed = -1",
        "no_such_field = 1",
        "[toggles]\nuse_camera = false",
        "[toggles]\nmulti_frame_count = 9",
        "[toggles]\ndropped_cameras = [7]",
        "[train]\nbatch_size = 0",
        "[loss]\npoint = -1.0",
        "[ablate]\nframe_counts = [0]",
        "[augment]\nflip_prob = 2.0",
        "[eval]\ndistance_bins = [20.0, 10.0]",
    ];
    for text in cases {
        assert!(matches!(ExperimentConfig::from_toml(text), Err(crate::Error::Config(_))), "{text}");
    }
}

/// Every file under `root` with its bytes, by relative path.
fn files(root: &std::path::Path) -> Vec<(std::path::PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn corpus_generation_is_reproducible_on_disk() {
    let cfg = tiny();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = cmd_generate(&cfg, a.path()).unwrap();
    cmd_generate(&cfg, b.path()).unwrap();
    assert_eq!((ma.train.len(), ma.val.len()), (2, 1));
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert!(fa.len() > 3);
    assert_eq!(fa, fb);
    let (_, loaded) = load_corpus(a.path()).unwrap();
    let built = build_corpus(&cfg).unwrap();
    assert_eq!(loaded.train, built.train);
    assert_eq!(loaded.val, built.val);
    assert_eq!(loaded.train[0].history.len(), 1);
}

#[test]
fn zero_iterations_keep_the_initialization() {
    let mut cfg = tiny();
    cfg.train.iterations = 0;
    let corpus = build_corpus(&cfg).unwrap();
    let (model, log) = train(&cfg, &corpus.train, |_| {}).unwrap();
    assert!(log.iterations.is_empty());
    let fresh = crate::model::Model::new(cfg.model.clone(), cfg.toggles.clone(), derive_seed(cfg.seed, streams::INIT, 0)).unwrap();
    assert_eq!(model.params.tensors(), fresh.params.tensors());
}

#[test]
fn training_logs_every_term_and_is_deterministic() {
    let cfg = tiny();
    let corpus = build_corpus(&cfg).unwrap();
    let (m1, log1) = train(&cfg, &corpus.train, |_| {}).unwrap();
    let (m2, log2) = train(&cfg, &corpus.train, |_| {}).unwrap();
    assert_eq!(log1, log2);
    assert_eq!(m1.params.tensors(), m2.params.tensors());
    assert_eq!(log1.iterations.len(), 3);
    let l = &log1.iterations[0].losses;
    assert!(l.point.is_some() && l.point_to_voxel.is_some() && l.point_to_pixel.is_some() && l.pixel_to_point.is_some());
}

#[test]
fn evaluation_counts_cover_the_current_sweep() {
    let cfg = tiny();
    let corpus = build_corpus(&cfg).unwrap();
    let (model, _) = train(&cfg, &corpus.train, |_| {}).unwrap();
    let m = evaluate(&model, &corpus.val, &cfg.eval).unwrap();
    let scored: u64 = corpus.val.iter().map(|s| s.cloud.labels.iter().filter(|&&c| c != 0).count() as u64).sum();
    assert_eq!(m.counts.total, scored);
    assert_eq!(m.counts.inside_fov + m.counts.outside_fov, m.counts.total);
    assert_eq!(m.gap, m.miou_fov.map(|f| m.miou - f));
}

#[test]
fn single_cell_ablation_matches_plain_evaluation() {
    let mut cfg = tiny();
    cfg.ablate.variants = vec![Variant::Full];
    let corpus = build_corpus(&cfg).unwrap();
    let report = ablate(&cfg, &corpus, |_| {}).unwrap();
    assert_eq!(report.rows.len(), 1);
    let (model, _) = train(&cfg, &corpus.train, |_| {}).unwrap();
    let m = evaluate(&model, &corpus.val, &cfg.eval).unwrap();
    let row = report.variant(11, Variant::Full).unwrap();
    assert_eq!((row.miou, row.miou_fov, row.gap), (m.miou, m.miou_fov, m.gap));
}

#[test]
fn ablation_grid_has_one_row_per_cell() {
    let mut cfg = tiny();
    cfg.ablate.variants = vec![Variant::LidarOnly, Variant::Completion];
    cfg.ablate.camera_drops = vec![0, 5];
    cfg.ablate.frame_counts = vec![1, 2];
    cfg.ablate.iterations = Some(1);
    let corpus = build_corpus(&cfg).unwrap();
    let report = ablate(&cfg, &corpus, |_| {}).unwrap();
    assert_eq!(report.rows.len(), 6);
    assert!(report.camera_drop(11, 5).is_some() && report.frames(11, 2).is_some());
    assert_eq!(report.camera_drop(11, 0).unwrap().miou, report.frames(11, 1).unwrap().miou);
    assert_eq!(report.camera_drop(11, 0).unwrap().variant, Variant::Completion);
}

#[test]
fn train_and_eval_commands_write_their_artifacts() {
    let cfg = tiny();
    let root = tempfile::tempdir().unwrap();
    let corpus = root.path().join("corpus");
    cmd_generate(&cfg, &corpus).unwrap();
    let run = root.path().join("run");
    let log = cmd_train(&cfg, &corpus, &run, |_| {}).unwrap();
    assert_eq!(log.iterations.len(), 3);
    let m = cmd_eval(&cfg, &corpus, &run.join("checkpoint"), &run).unwrap();
    let text = std::fs::read_to_string(run.join("metrics.json")).unwrap();
    let back: crate::eval::Metrics = serde_json::from_str(&text).unwrap();
    assert_eq!(back, m);
    let saved = ExperimentConfig::load(&run.join("config.toml")).unwrap();
    assert_eq!(saved, cfg);

    let mut other = cfg.clone();
    other.model.fusion.blocks = 2;
    let err = cmd_eval(&other, &corpus, &run.join("checkpoint"), &run).unwrap_err();
    assert!(matches!(err, crate::Error::Config(_)), "{err}");
}
