//! Geometry-based and semantic-based fusion plus cross-modal completion.

mod attention;
mod gather;
mod modules;

pub use attention::{Attention, LayerNorm, Sffm, SffmBlock, SffmOutput};
pub use gather::{complete_features, gather_point_features, image_rows, sampling_rows, PointFeatures};
pub use modules::{class_embeddings, CameraSfam, FusionConfig, Gffm, LidarSfam, PseudoCamera, SfamOutput};
