//! Camera projection, voxel grouping and multi-sweep collapsing.

mod camera;
mod cloud;
mod frames;
mod projection;
mod voxel;

pub use camera::{pose_from_record, pose_to_record, Camera, CameraRecord, CameraRig};
pub use cloud::PointCloud;
pub use frames::{collapse_frames, CollapsedCloud, Frame, FRAMES_FRONT_64_BEAM, FRAMES_SURROUND_32_BEAM};
pub use projection::{project_points, PixelRef, ProjectionIndex};
pub use voxel::{devoxelize, voxel_coord, voxelize, SparseVoxelSet, DEFAULT_VOXEL_SIZE, DEVOXEL_EPS};
