//! Labels for every supervised branch and the losses that consume them.

mod labels;
mod losses;

pub use labels::{point_to_pixel_labels, point_to_voxel_labels};
pub use losses::{
    cross_entropy, cross_entropy_value, lovasz_softmax, lovasz_softmax_value, pixel2point_loss, pixel2point_value,
    total_loss, LossParts, LossWeights,
};
