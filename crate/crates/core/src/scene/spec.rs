use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::classes::{GROUND, NUM_CLASSES};

/// Object counts per placed kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectCounts {
    pub clutter: usize,
    pub building: usize,
    pub vehicle: usize,
    pub truck: usize,
    pub sphere: usize,
    pub cylinder: usize,
    pub barrier: usize,
}

impl Default for ObjectCounts {
    fn default() -> Self {
        Self {
            clutter: 5,
            building: 4,
            vehicle: 6,
            truck: 3,
            sphere: 5,
            cylinder: 5,
            barrier: 5,
        }
    }
}

impl ObjectCounts {
    /// Count for a class id; the ground is not an object.
    pub fn for_class(&self, class: usize) -> usize {
        [
            self.clutter,
            0,
            self.building,
            self.vehicle,
            self.truck,
            self.sphere,
            self.cylinder,
            self.barrier,
        ][class]
    }
}

/// Everything that parameterizes one synthetic sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub num_points: usize,
    pub num_cameras: usize,
    pub image_height: usize,
    pub image_width: usize,
    /// Total azimuth covered by the camera ring.
    pub camera_coverage_deg: f64,
    pub camera_pitch_deg: f64,
    /// Sensor height above the ground; the ground sits at `z = -sensor_height`.
    pub sensor_height: f64,
    pub beams: usize,
    pub beam_min_deg: f64,
    pub beam_max_deg: f64,
    pub azimuth_steps: usize,
    pub max_range: f64,
    /// Objects are placed with footprint centers in this horizontal annulus.
    pub min_radius: f64,
    pub max_radius: f64,
    /// Target label fractions, indexed by class id.
    pub class_proportions: Vec<f64>,
    pub objects: ObjectCounts,
    pub reflectance_noise: f64,
    /// Forward ego motion between consecutive sweeps, in meters.
    pub sweep_step: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            num_points: 8000,
            num_cameras: 5,
            image_height: 256,
            image_width: 256,
            camera_coverage_deg: 300.0,
            camera_pitch_deg: 0.0,
            sensor_height: 1.8,
            beams: 32,
            beam_min_deg: -25.0,
            beam_max_deg: 10.0,
            azimuth_steps: 720,
            max_range: 50.0,
            min_radius: 5.0,
            max_radius: 30.0,
            class_proportions: vec![0.05, 0.30, 0.20, 0.12, 0.10, 0.08, 0.07, 0.08],
            objects: ObjectCounts::default(),
            reflectance_noise: 0.05,
            sweep_step: 0.5,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.class_proportions.len() != NUM_CLASSES {
            return bad(format!("class_proportions needs {NUM_CLASSES} entries"));
        }
        if self.class_proportions.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return bad("class_proportions must be non-negative".into());
        }
        let valid = (1..NUM_CLASSES).filter(|&c| self.class_proportions[c] > 0.0).count();
        if valid < 2 {
            return bad("at least two non-ignored classes need a positive proportion".into());
        }
        for c in 0..NUM_CLASSES {
            if c != GROUND && self.class_proportions[c] > 0.0 && self.objects.for_class(c) == 0 {
                return bad(format!("class {c} has a positive proportion but no objects"));
            }
        }
        if self.num_cameras == 0 {
            return bad("at least one camera is required".into());
        }
        if self.num_points == 0 || self.beams < 2 || self.azimuth_steps == 0 {
            return bad("point, beam and azimuth counts must be positive".into());
        }
        if self.image_height == 0 || self.image_width == 0 {
            return bad("image size must be positive".into());
        }
        if !(self.camera_coverage_deg > 0.0 && self.camera_coverage_deg <= 360.0) {
            return bad("camera_coverage_deg must be in (0, 360]".into());
        }
        if !(self.min_radius >= 0.0 && self.max_radius > self.min_radius && self.max_range > 0.0) {
            return bad("placement radii must satisfy 0 <= min < max".into());
        }
        if !(self.beam_max_deg > self.beam_min_deg) || !(self.sensor_height > 0.0) {
            return bad("beam range and sensor height must be positive".into());
        }
        if !(self.reflectance_noise >= 0.0) || !(self.sweep_step >= 0.0) {
            return bad("noise and sweep step must be non-negative".into());
        }
        Ok(())
    }

    /// Per-class point targets summing to `num_points` (largest remainder).
    pub fn class_targets(&self) -> Vec<usize> {
        let total: f64 = self.class_proportions.iter().sum();
        let exact: Vec<f64> = self
            .class_proportions
            .iter()
            .map(|p| p / total * self.num_points as f64)
            .collect();
        let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut rest = self.num_points - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..NUM_CLASSES).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        for c in order {
            if rest == 0 {
                break;
            }
            if self.class_proportions[c] > 0.0 {
                counts[c] += 1;
                rest -= 1;
            }
        }
        counts
    }
}
