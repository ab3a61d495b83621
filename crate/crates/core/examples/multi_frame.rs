//! Collapses earlier sweeps of a moving sensor into the current sensor frame.

use fuseg3d::scene::{generate_sequence, SceneSpec};

fn main() -> fuseg3d::Result<()> {
    let scene = generate_sequence(9, &SceneSpec::default(), 3)?;
    for frames in 1..=3 {
        let s = scene.sample(frames)?;
        let current = s.frame_of.iter().filter(|&&f| f == 0).count();
        println!(
            "{frames} sweep(s): {} points ({current} from the current sweep), {} seen by a camera",
            s.cloud.len(),
            s.projection.visible_count()
        );
    }
    for (k, f) in scene.history.iter().enumerate() {
        let d = f.pose.translation.vector - scene.ego_pose.translation.vector;
        println!("sweep -{}: sensor offset ({:.2}, {:.2}, {:.2}) m", k + 1, d.x, d.y, d.z);
    }
    Ok(())
}
