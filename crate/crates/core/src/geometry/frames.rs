use nalgebra::Isometry3;

use crate::error::{Error, Result};

use super::PointCloud;

/// Frames collapsed per sample in the six-camera, 32-beam setting.
pub const FRAMES_SURROUND_32_BEAM: usize = 25;
/// Frames collapsed per sample in the five-camera, 64-beam setting.
pub const FRAMES_FRONT_64_BEAM: usize = 10;

/// One sweep with the sensor-to-world pose it was captured at.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub cloud: PointCloud,
    pub pose: Isometry3<f64>,
}

/// Points from several sweeps expressed in one target frame.
#[derive(Clone, Debug)]
pub struct CollapsedCloud {
    pub cloud: PointCloud,
    /// Source frame of every output point.
    pub frame_of: Vec<usize>,
}

/// Maps every frame's points into the sensor frame at `target_pose`:
/// `p_target = T_target^-1 * T_frame * p`. Output order follows input order.
pub fn collapse_frames(frames: &[Frame], target_pose: &Isometry3<f64>) -> Result<CollapsedCloud> {
    let Some(first) = frames.first() else {
        return Err(Error::Empty("collapse_frames needs at least one frame"));
    };
    let width = first.cloud.attribute_width;
    let to_target = target_pose.inverse();
    let mut positions = Vec::new();
    let mut attributes = Vec::new();
    let mut labels = Vec::new();
    let mut frame_of = Vec::new();
    for (k, f) in frames.iter().enumerate() {
        if f.cloud.attribute_width != width {
            return Err(Error::shape(
                "collapse_frames",
                format!("frame {k} has attribute width {}, expected {width}", f.cloud.attribute_width),
            ));
        }
        let moved = f.cloud.transformed(&(to_target * f.pose));
        positions.extend(moved.positions);
        attributes.extend(moved.attributes);
        labels.extend(moved.labels);
        frame_of.extend(std::iter::repeat_n(k, f.cloud.len()));
    }
    Ok(CollapsedCloud {
        cloud: PointCloud::new(positions, attributes, width, labels)?,
        frame_of,
    })
}
