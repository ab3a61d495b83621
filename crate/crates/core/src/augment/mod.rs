//! Data augmentation that keeps points, images and pixel indices in step.
//!
//! LiDAR-scope transforms move points only; the stored `(camera, u, v)`
//! stay valid because the images describe the world before the move.
//! Camera-scope transforms warp one image and move its pixel coordinates
//! with the same map. Symmetric flips mirror the world, which shows up as a
//! left-right mirror of every image when an odd number of axes flip.

mod geometric;
mod jpeg;
mod photometric;
mod plan;
#[cfg(test)]
mod tests;

pub use geometric::{
    flip_points, mirror_images, rotate_points, scale_points, translate_points, warp_plane, warp_projection, Affine2,
};
pub use jpeg::{jpeg_round_trip, quant_table};
pub use photometric::color_jitter;
pub use plan::{sample_plan, AugmentConfig, AugmentationPlan, Scope, Step, Transform};

use crate::error::{Error, Result};
use crate::scene::Sample;

/// Applies every step of `plan` in order.
pub fn apply_plan(sample: &mut Sample, plan: &AugmentationPlan) -> Result<()> {
    for step in &plan.steps {
        apply_step(sample, step)?;
    }
    Ok(())
}

pub fn apply_step(sample: &mut Sample, step: &Step) -> Result<()> {
    let points = &mut sample.cloud.positions;
    let images = &mut sample.images;
    let (h, w) = (images.height, images.width);
    match (step.scope, &step.transform) {
        (Scope::Lidar, Transform::Rotate { angle }) => rotate_points(points, *angle),
        (Scope::Lidar, Transform::Translate { offset }) => translate_points(points, *offset),
        (Scope::Lidar, Transform::Scale { factor }) => scale_points(points, *factor),
        (Scope::Symmetric, Transform::Flip { x, y }) => {
            flip_points(points, *x, *y);
            if x != y {
                mirror_images(images, &mut sample.projection);
            }
        }
        (Scope::Camera(c), t) if c >= images.cameras => {
            return Err(Error::InvalidArgument(format!("{t:?} targets camera {c} of {}", images.cameras)))
        }
        (Scope::Camera(c), Transform::CameraAffine { scale, angle, offset }) => {
            let map = Affine2::camera(*scale, *angle, *offset, h, w);
            warp_plane(images.camera_mut(c), h, w, &map);
            warp_projection(&mut sample.projection, c, &map, h, w);
        }
        (Scope::Camera(c), Transform::ColorJitter { brightness, contrast, saturation, hue }) => {
            color_jitter(images.camera_mut(c), *brightness, *contrast, *saturation, *hue)
        }
        (Scope::Camera(c), Transform::Jpeg { quality }) => jpeg_round_trip(images.camera_mut(c), h, w, *quality),
        (scope, t) => return Err(Error::InvalidArgument(format!("{t:?} is not allowed in scope {scope:?}"))),
    }
    Ok(())
}
