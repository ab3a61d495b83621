//! Scores predictions with the confusion-matrix harness and prints the metrics JSON.

use fuseg3d::eval::{AbsentClasses, DistanceBins, Evaluator, Scope};
use fuseg3d::scene::NUM_CLASSES;

fn main() -> fuseg3d::Result<()> {
    let labels = [1, 1, 2, 2, 3, 3, 4, 5];
    let pred = [1, 1, 2, 3, 3, 3, 4, 6];
    // The last three points fall outside every camera.
    let fov = [true, true, true, true, true, false, false, false];
    let positions: Vec<[f64; 3]> = (0..labels.len()).map(|i| [6.0 * i as f64, 0.0, 0.0]).collect();

    let mut ev = Evaluator::new(NUM_CLASSES, DistanceBins::default(), AbsentClasses::Exclude)?;
    ev.add(&pred, &labels, &fov, &positions)?;
    let m = ev.finish(Scope::All)?;
    println!("{}", serde_json::to_string_pretty(&m).expect("metrics serialize"));
    Ok(())
}
