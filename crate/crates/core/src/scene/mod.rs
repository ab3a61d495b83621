//! Deterministic synthetic LiDAR + multi-camera scenes with exact labels.

mod bundle;
pub mod classes;
mod render;
mod shapes;
mod spec;
mod synth;

pub use bundle::{ImageStack, Sample, SceneBundle};
pub use classes::{classify_color, CLASS_NAMES, IGNORE, NUM_CLASSES};
pub use render::{paint_check, render_images, PaintReport};
pub use shapes::{Object, Shape, World};
pub use spec::{ObjectCounts, SceneSpec};
pub use synth::{generate_scene, generate_scene_with_objects, generate_sequence, spec_rig};

#[cfg(test)]
mod tests;
