use crate::error::Result;
use crate::eval::{Evaluator, Metrics};
use crate::model::{prepare, Model};
use crate::scene::SceneBundle;

use super::EvalConfig;

/// Scores the current sweep of every scene with the model's own toggles
/// (sweep count, broken cameras). The field-of-view scope always refers to
/// the intact rig so that camera-drop rows stay comparable.
pub fn evaluate(model: &Model, scenes: &[SceneBundle], cfg: &EvalConfig) -> Result<Metrics> {
    let mut ev = Evaluator::new(model.config.num_classes, cfg.distance_bins.clone(), cfg.absent_classes)?;
    for scene in scenes {
        let sample = scene.sample(model.toggles.multi_frame_count)?;
        let current: Vec<usize> = (0..sample.frame_of.len()).filter(|&i| sample.frame_of[i] == 0).collect();
        let prep = prepare(&sample, &model.config, &model.toggles, &current)?;
        let pred = model.predict(&prep, cfg.chunk)?;
        let fov: Vec<bool> = current.iter().map(|&i| sample.projection.entries[i].is_some()).collect();
        ev.add(&pred, &prep.labels, &fov, &prep.positions)?;
    }
    ev.finish(cfg.scope)
}
