use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
seed = 5

[corpus]
train_scenes = 2
val_scenes = 1
sweeps = 1

[scene]
num_points = 1500
image_height = 64
image_width = 64

[model.backbone]
voxel_width = 8
image_width = 8
levels = [4]

[model.fusion]
inter_width = 8
gfused_width = 8
sfused_width = 8
heads = 2
blocks = 1

[train]
iterations = 4
points_per_scene = 128

[ablate]
frame_counts = [1]
"#;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fuseg3d")).args(args).current_dir(dir).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn generate_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    let common = ["--config", "tiny.toml", "--corpus", "data", "--out", "run"];
    let g = run(&["generate", "--config", "tiny.toml", "--out", "data"], dir.path());
    assert_eq!(code(&g), 0, "{}", String::from_utf8_lossy(&g.stderr));
    let t = run(&[&["train"][..], &common].concat(), dir.path());
    assert_eq!(code(&t), 0, "{}", String::from_utf8_lossy(&t.stderr));
    let e = run(&[&["eval", "--checkpoint", "run/checkpoint"][..], &common].concat(), dir.path());
    assert_eq!(code(&e), 0, "{}", String::from_utf8_lossy(&e.stderr));
    assert!(String::from_utf8_lossy(&e.stdout).contains("mIoU"));
    let metrics: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("run/metrics.json")).unwrap()).unwrap();
    assert!(metrics["miou"].as_f64().is_some());
    assert!(dir.path().join("run/train_log.json").exists());
    assert!(dir.path().join("run/config.toml").exists());
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    for (seed, out) in [("5", "a"), ("6", "b")] {
        let o = run(&["generate", "--config", "tiny.toml", "--seed", seed, "--out", out], dir.path());
        assert_eq!(code(&o), 0);
    }
    let manifest = |d: &str| std::fs::read_to_string(dir.path().join(d).join("corpus.json")).unwrap();
    assert_ne!(manifest("a"), manifest("b"));
}

#[test]
fn config_problems_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("typo.toml"), "[train]\niteratons = 3\n").unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[corpus]\ntrain_scenes = 0\n").unwrap();
    for file in ["typo.toml", "bad.toml", "missing.toml"] {
        let o = run(&["generate", "--config", file, "--out", "x"], dir.path());
        assert_eq!(code(&o), 2, "{file}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn diverging_training_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("{TINY}\n[train.optimizer]\nlearning_rate = 1e250\nwarmup = 0\nclip_norm = 0.0\n");
    std::fs::write(dir.path().join("hot.toml"), cfg).unwrap();
    let g = run(&["generate", "--config", "hot.toml", "--out", "data"], dir.path());
    assert_eq!(code(&g), 0);
    let t = run(&["train", "--config", "hot.toml", "--corpus", "data", "--out", "run"], dir.path());
    assert_eq!(code(&t), 3, "{}", String::from_utf8_lossy(&t.stderr));
}

#[test]
fn unknown_subcommand_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["fit"], dir.path());
    assert_ne!(code(&o), 0);
}
