//! Samples a random augmentation plan, applies it step by step and shows that
//! geometric steps keep points and pixels aligned. Photometric steps change the
//! colors themselves, so the color match drops after them by design.

use fuseg3d::augment::{apply_step, sample_plan, AugmentConfig};
use fuseg3d::scene::{generate_scene, paint_check, SceneSpec};

fn main() -> fuseg3d::Result<()> {
    let scene = generate_scene(3, &SceneSpec::default())?;
    let mut sample = scene.sample(1)?;
    let im = &sample.images;
    let plan = sample_plan(11, &AugmentConfig::default(), im.cameras, im.height, im.width)?;

    let before = paint_check(&sample.cloud, &sample.projection, &sample.images);
    println!("before: {:.2}% of {} visible points match their pixel", 100.0 * before.fraction(), before.checked);
    for step in &plan.steps {
        apply_step(&mut sample, step)?;
        let r = paint_check(&sample.cloud, &sample.projection, &sample.images);
        let scope = format!("{:?}", step.scope);
        println!("{scope:<10} {:?}: {:.2}% of {} visible", step.transform, 100.0 * r.fraction(), r.checked);
    }
    let json = serde_json::to_string(&plan).expect("plan serializes");
    println!("the {}-step plan replays from {} bytes of JSON", plan.steps.len(), json.len());
    Ok(())
}
