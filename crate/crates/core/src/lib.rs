//! LiDAR-camera fusion for 3D semantic segmentation.

pub mod augment;
pub mod backbone;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod fusion;
pub mod geometry;
pub mod model;
pub mod nn;
pub mod scene;
pub mod store;
pub mod supervision;
pub mod tensor;

pub use error::{Error, Result};
