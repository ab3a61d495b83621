use crate::error::Result;

use super::CameraRig;

/// Pixel hit of one point: camera id, full-resolution pixel coordinates and
/// camera-frame depth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelRef {
    pub camera: usize,
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Per-point projection; `None` entries are points outside every camera (B = 0).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProjectionIndex {
    pub entries: Vec<Option<PixelRef>>,
}

impl ProjectionIndex {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mask(&self) -> Vec<bool> {
        self.entries.iter().map(Option::is_some).collect()
    }

    pub fn visible_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_some()).count()
    }

    pub fn get(&self, i: usize) -> Option<PixelRef> {
        self.entries[i]
    }

    /// Clears every entry that refers to one of the listed cameras.
    pub fn drop_cameras(&mut self, cameras: &[usize]) {
        for e in &mut self.entries {
            if e.is_some_and(|p| cameras.contains(&p.camera)) {
                *e = None;
            }
        }
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            entries: rows.iter().map(|&r| self.entries[r]).collect(),
        }
    }
}

/// Projects LiDAR-frame points into the rig.
///
/// A point seen by several cameras goes to the one whose optical axis is
/// closest to the viewing ray; ties keep the lower camera index.
pub fn project_points(points: &[[f64; 3]], rig: &CameraRig) -> Result<ProjectionIndex> {
    rig.validate()?;
    let entries = points
        .iter()
        .map(|&p| {
            let mut best: Option<(f64, PixelRef)> = None;
            for (camera, cam) in rig.cameras.iter().enumerate() {
                if let Some((u, v, depth)) = cam.project(p) {
                    let cos = cam.axis_cosine(p);
                    if best.is_none_or(|(b, _)| cos > b) {
                        best = Some((cos, PixelRef { camera, u, v, depth }));
                    }
                }
            }
            best.map(|(_, r)| r)
        })
        .collect();
    Ok(ProjectionIndex { entries })
}
