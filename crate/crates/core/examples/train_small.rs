//! Generates a small corpus, trains the LiDAR-only and full models briefly and
//! compares them on the val split. Pass an iteration count to train longer.

use fuseg3d::experiment::{build_corpus, evaluate, train, ExperimentConfig};
use fuseg3d::model::Variant;

fn main() -> fuseg3d::Result<()> {
    let iterations = std::env::args().nth(1).map_or(150, |a| a.parse().expect("iteration count"));
    let mut cfg = ExperimentConfig::default();
    cfg.corpus.train_scenes = 12;
    cfg.corpus.val_scenes = 4;
    cfg.corpus.sweeps = 1;
    cfg.ablate.frame_counts = vec![1];
    cfg.train.iterations = iterations;
    cfg.train.points_per_scene = 512;
    cfg.validate()?;

    let corpus = build_corpus(&cfg)?;
    println!("{} train / {} val scenes", corpus.train.len(), corpus.val.len());
    for v in [Variant::LidarOnly, Variant::Full] {
        let run = ExperimentConfig { toggles: cfg.toggles_for(v), ..cfg.clone() };
        let (model, log) = train(&run, &corpus.train, |_| {})?;
        let last = log.iterations.last().map_or(0.0, |i| i.losses.total);
        let m = evaluate(&model, &corpus.val, &run.eval)?;
        println!("{:<16} final loss {last:.3}  val mIoU {:.4}", v.name(), m.miou);
    }
    Ok(())
}
