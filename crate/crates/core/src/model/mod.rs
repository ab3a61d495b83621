//! The segmentation network with every fusion stage behind a switch.

mod config;
mod net;
mod prepare;
#[cfg(test)]
mod tests;

pub use config::{ModelConfig, Toggles, Variant};
pub use net::{Model, PointOutput, SceneFeatures, StepLosses};
pub use prepare::{prepare, Prepared};
