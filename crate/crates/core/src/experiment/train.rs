use rand::seq::index::sample as sample_indices;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{apply_plan, sample_plan, AugmentConfig};
use crate::error::{Error, Result};
use crate::model::{prepare, Model, StepLosses, Toggles};
use crate::nn::{cosine_rate, Optimizer};
use crate::scene::SceneBundle;
use crate::tensor::Tensor;

use super::{derive_seed, streams, ExperimentConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub step: usize,
    pub rate: f64,
    pub grad_norm: f64,
    /// Averaged over the scenes of the batch.
    pub losses: StepLosses,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub iterations: Vec<IterationLog>,
}

/// Without cameras the image transforms are wasted work.
fn augment_for(cfg: &AugmentConfig, toggles: &Toggles) -> AugmentConfig {
    if toggles.use_camera {
        cfg.clone()
    } else {
        AugmentConfig {
            camera_scaling: false,
            camera_rotation: false,
            crop: false,
            color_jitter: false,
            jpeg: false,
            ..cfg.clone()
        }
    }
}

/// Trains the network selected by `cfg.toggles` on `scenes`.
/// `progress` sees every iteration as it finishes.
pub fn train(
    cfg: &ExperimentConfig,
    scenes: &[SceneBundle],
    mut progress: impl FnMut(&IterationLog),
) -> Result<(Model, TrainLog)> {
    cfg.validate()?;
    if scenes.is_empty() && cfg.train.iterations > 0 {
        return Err(Error::Empty("training needs at least one scene"));
    }
    let toggles = &cfg.toggles;
    let mut model = Model::new(cfg.model.clone(), toggles.clone(), derive_seed(cfg.seed, streams::INIT, 0))?;
    let mut optimizer = Optimizer::new(cfg.train.optimizer.clone(), &model.params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, streams::BATCHES, 0));
    let augment = augment_for(&cfg.augment, toggles);
    let total = cfg.train.iterations;
    let mut log = TrainLog::default();
    for step in 0..total {
        let mut sum: Option<Vec<Tensor>> = None;
        let mut losses = StepLosses::default();
        let b = cfg.train.batch_size;
        for _ in 0..b {
            let scene = &scenes[rng.gen_range(0..scenes.len())];
            let mut sample = scene.sample(toggles.multi_frame_count)?;
            let im = &sample.images;
            let plan = sample_plan(rng.next_u64(), &augment, im.cameras, im.height, im.width)?;
            apply_plan(&mut sample, &plan)?;
            let current: Vec<usize> = (0..sample.frame_of.len()).filter(|&i| sample.frame_of[i] == 0).collect();
            let k = cfg.train.points_per_scene.min(current.len());
            let mut picked: Vec<usize> = sample_indices(&mut rng, current.len(), k).into_iter().map(|i| current[i]).collect();
            picked.sort_unstable();
            let prep = prepare(&sample, &cfg.model, toggles, &picked)?;
            let (l, grads) = model.gradients(&prep, &cfg.loss)?;
            accumulate_losses(&mut losses, &l, b);
            match &mut sum {
                None => sum = Some(grads),
                Some(acc) => {
                    for (a, g) in acc.iter_mut().zip(&grads) {
                        a.data_mut().iter_mut().zip(g.data()).for_each(|(x, y)| *x += y);
                    }
                }
            }
        }
        let mut grads = sum.expect("batch_size is positive");
        if b > 1 {
            let inv = 1.0 / b as f64;
            grads.iter_mut().for_each(|g| g.data_mut().iter_mut().for_each(|x| *x *= inv));
        }
        let rate = cosine_rate(&cfg.train.optimizer, step, total);
        let grad_norm = optimizer.step(&mut model.params, &grads, rate)?;
        let entry = IterationLog { step, rate, grad_norm, losses };
        progress(&entry);
        log.iterations.push(entry);
    }
    Ok((model, log))
}

fn accumulate_losses(acc: &mut StepLosses, l: &StepLosses, batch: usize) {
    let w = 1.0 / batch as f64;
    let add = |a: &mut Option<f64>, b: Option<f64>| {
        if let Some(b) = b {
            *a = Some(a.unwrap_or(0.0) + w * b);
        }
    };
    acc.total += w * l.total;
    add(&mut acc.point, l.point);
    add(&mut acc.point_to_voxel, l.point_to_voxel);
    add(&mut acc.point_to_pixel, l.point_to_pixel);
    add(&mut acc.pixel_to_point, l.pixel_to_point);
}
