use nalgebra::{Isometry3, Matrix3, Point3, Quaternion, Rotation3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole camera with a rigid LiDAR-to-camera transform.
///
/// The camera frame looks down +z with +x to the right and +y down, so a
/// point `p_c` lands on pixel `(fx * x / z + cx, fy * y / z + cy)`. Integer
/// pixel coordinates are pixel centers.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub extrinsic: Isometry3<f64>,
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite || self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::InvalidRig(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidRig("image size must be non-zero".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(Error::InvalidRig(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn to_camera_frame(&self, p: [f64; 3]) -> Vector3<f64> {
        (self.extrinsic * Point3::from(p)).coords
    }

    /// Pixel coordinates and depth of a LiDAR-frame point, if it lies in front
    /// of the camera and inside the image.
    pub fn project(&self, p: [f64; 3]) -> Option<(f64, f64, f64)> {
        let c = self.to_camera_frame(p);
        if c.z <= 0.0 {
            return None;
        }
        let u = self.fx * c.x / c.z + self.cx;
        let v = self.fy * c.y / c.z + self.cy;
        self.contains(u, v).then_some((u, v, c.z))
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        (0.0..self.width as f64).contains(&u) && (0.0..self.height as f64).contains(&v)
    }

    /// Cosine of the angle between the optical axis and the ray to `p`.
    pub fn axis_cosine(&self, p: [f64; 3]) -> f64 {
        let c = self.to_camera_frame(p);
        c.z / c.norm()
    }

    /// Ray through pixel `(u, v)` in the LiDAR frame: origin and unit direction.
    pub fn pixel_ray(&self, u: f64, v: f64) -> (Point3<f64>, Vector3<f64>) {
        let inv = self.extrinsic.inverse();
        let dir_c = Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        let origin = inv * Point3::origin();
        (origin, (inv.rotation * dir_c).normalize())
    }

    /// Camera at `position` (LiDAR frame) looking along azimuth `yaw` and
    /// elevation `pitch`, both in radians, with a square-pixel horizontal FOV.
    pub fn looking(
        position: [f64; 3],
        yaw: f64,
        pitch: f64,
        hfov: f64,
        width: usize,
        height: usize,
    ) -> Self {
        let fx = (width as f64 / 2.0) / (hfov / 2.0).tan();
        // LiDAR axes (x fwd, y left, z up) to camera axes (x right, y down, z fwd).
        let base = Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0);
        let base = Rotation3::from_matrix_unchecked(base);
        let heading = Rotation3::from_axis_angle(&Vector3::z_axis(), yaw)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), -pitch);
        let rot = base * heading.inverse();
        let t = -(rot * Vector3::from(position));
        Camera {
            fx,
            fy: fx,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            width,
            height,
            extrinsic: Isometry3::from_parts(Translation3::from(t), UnitQuaternion::from_rotation_matrix(&rot)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CameraRig {
    pub cameras: Vec<Camera>,
}

impl CameraRig {
    pub fn new(cameras: Vec<Camera>) -> Result<Self> {
        let rig = Self { cameras };
        rig.validate()?;
        Ok(rig)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cameras.is_empty() {
            return Err(Error::InvalidRig("rig has no cameras".into()));
        }
        let (w, h) = (self.cameras[0].width, self.cameras[0].height);
        for c in &self.cameras {
            c.validate()?;
            if (c.width, c.height) != (w, h) {
                return Err(Error::InvalidRig("all cameras must share one image size".into()));
            }
        }
        Ok(())
    }

    /// `n` cameras spread evenly over `coverage` radians of azimuth starting at
    /// yaw 0, each with horizontal FOV `coverage / n`.
    pub fn ring(n: usize, coverage: f64, position: [f64; 3], pitch: f64, width: usize, height: usize) -> Result<Self> {
        if n == 0 || !(coverage > 0.0 && coverage <= std::f64::consts::TAU) {
            return Err(Error::InvalidRig(format!("cannot build a ring of {n} cameras over {coverage} rad")));
        }
        let fov = coverage / n as f64;
        if fov >= std::f64::consts::PI {
            return Err(Error::InvalidRig("per-camera FOV must be below 180 degrees".into()));
        }
        let cameras = (0..n)
            .map(|k| Camera::looking(position, k as f64 * fov, pitch, fov, width, height))
            .collect();
        Self::new(cameras)
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn image_size(&self) -> (usize, usize) {
        (self.cameras[0].height, self.cameras[0].width)
    }

    /// Applies a rigid motion of the LiDAR frame: points `p` become `m * p`,
    /// so extrinsics become `E * m^-1`.
    pub fn moved(&self, m: &Isometry3<f64>) -> Self {
        let inv = m.inverse();
        Self {
            cameras: self
                .cameras
                .iter()
                .map(|c| Camera {
                    extrinsic: c.extrinsic * inv,
                    ..c.clone()
                })
                .collect(),
        }
    }

    pub fn to_record(&self) -> Vec<CameraRecord> {
        self.cameras.iter().map(CameraRecord::from).collect()
    }

    pub fn from_record(records: &[CameraRecord]) -> Result<Self> {
        Self::new(records.iter().map(Camera::try_from).collect::<Result<_>>()?)
    }
}

/// Serializable camera: rotation as a unit quaternion `[i, j, k, w]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
}

impl From<&Camera> for CameraRecord {
    fn from(c: &Camera) -> Self {
        let (rotation, translation) = pose_to_record(&c.extrinsic);
        Self {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
            rotation,
            translation,
        }
    }
}

impl TryFrom<&CameraRecord> for Camera {
    type Error = Error;

    fn try_from(r: &CameraRecord) -> Result<Self> {
        let cam = Camera {
            fx: r.fx,
            fy: r.fy,
            cx: r.cx,
            cy: r.cy,
            width: r.width,
            height: r.height,
            extrinsic: pose_from_record(&r.rotation, &r.translation)?,
        };
        cam.validate()?;
        Ok(cam)
    }
}

pub fn pose_to_record(pose: &Isometry3<f64>) -> ([f64; 4], [f64; 3]) {
    let q = pose.rotation.quaternion();
    let t = pose.translation.vector;
    ([q.i, q.j, q.k, q.w], [t.x, t.y, t.z])
}

/// Builds a rigid transform, rejecting quaternions that are not unit length.
///
/// The stored quaternion is used as is, so a saved pose reloads bit-identically.
pub fn pose_from_record(rotation: &[f64; 4], translation: &[f64; 3]) -> Result<Isometry3<f64>> {
    let [i, j, k, w] = *rotation;
    let q = Quaternion::new(w, i, j, k);
    if rotation.iter().chain(translation).any(|v| !v.is_finite()) || (q.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidRig("extrinsic rotation is not a unit quaternion".into()));
    }
    let rot = UnitQuaternion::new_unchecked(q);
    Ok(Isometry3::from_parts(Translation3::from(Vector3::from(*translation)), rot))
}
