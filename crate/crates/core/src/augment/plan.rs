use std::f64::consts::FRAC_PI_4;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which transform families run and with what ranges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub rotation: bool,
    /// Half-width of the uniform yaw range, radians.
    pub rotation_range: f64,
    pub translation: bool,
    pub translation_std: f64,
    pub scaling: bool,
    pub scale_range: [f64; 2],
    pub flip: bool,
    pub flip_prob: f64,
    pub camera_scaling: bool,
    pub camera_scale_range: [f64; 2],
    pub camera_rotation: bool,
    /// Half-width of the in-plane rotation range, degrees.
    pub camera_rotation_deg: f64,
    /// Random crop back to the input size; without it the crop is centered.
    pub crop: bool,
    pub color_jitter: bool,
    pub brightness: f64,
    pub contrast: f64,
    pub saturation: f64,
    pub hue: f64,
    pub jpeg: bool,
    pub jpeg_quality: [u8; 2],
    pub jpeg_prob: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            rotation: true,
            rotation_range: FRAC_PI_4,
            translation: true,
            translation_std: 0.5,
            scaling: true,
            scale_range: [0.95, 1.05],
            flip: true,
            flip_prob: 0.5,
            camera_scaling: true,
            camera_scale_range: [1.0, 1.5],
            camera_rotation: true,
            camera_rotation_deg: 1.0,
            crop: true,
            color_jitter: true,
            brightness: 0.3,
            contrast: 0.3,
            saturation: 0.3,
            hue: 0.1,
            jpeg: true,
            jpeg_quality: [30, 70],
            jpeg_prob: 0.5,
        }
    }
}

impl AugmentConfig {
    /// Every family off.
    pub fn disabled() -> Self {
        Self {
            rotation: false,
            translation: false,
            scaling: false,
            flip: false,
            camera_scaling: false,
            camera_rotation: false,
            crop: false,
            color_jitter: false,
            jpeg: false,
            ..Self::default()
        }
    }

    /// LiDAR-side and symmetric families only; images stay untouched.
    pub fn lidar_only() -> Self {
        Self {
            camera_scaling: false,
            camera_rotation: false,
            crop: false,
            color_jitter: false,
            jpeg: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("augmentation: {m}")));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !(self.rotation_range >= 0.0 && self.rotation_range.is_finite()) {
            return bad("rotation_range must be non-negative");
        }
        if !(self.translation_std >= 0.0 && self.translation_std.is_finite()) {
            return bad("translation_std must be non-negative");
        }
        let [lo, hi] = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad("scale_range must satisfy 0 < lo <= hi");
        }
        let [lo, hi] = self.camera_scale_range;
        if !(lo >= 1.0 && lo <= hi && hi.is_finite()) {
            return bad("camera_scale_range must satisfy 1 <= lo <= hi so the crop fits");
        }
        if !prob(self.flip_prob) || !prob(self.jpeg_prob) {
            return bad("probabilities must lie in [0, 1]");
        }
        if !(self.camera_rotation_deg >= 0.0 && self.camera_rotation_deg < 90.0) {
            return bad("camera_rotation_deg must lie in [0, 90)");
        }
        let jitter = [self.brightness, self.contrast, self.saturation];
        if jitter.iter().any(|&j| !(0.0..1.0).contains(&j)) || !(0.0..=0.5).contains(&self.hue) {
            return bad("jitter strengths must lie in [0, 1) and hue in [0, 0.5]");
        }
        let [qlo, qhi] = self.jpeg_quality;
        if !(1..=100).contains(&qlo) || !(qlo..=100).contains(&qhi) {
            return bad("jpeg_quality must satisfy 1 <= lo <= hi <= 100");
        }
        Ok(())
    }
}

/// Which part of the sample a transform may touch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scope {
    Lidar,
    Symmetric,
    Camera(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Transform {
    /// Yaw about the vertical axis, radians.
    Rotate { angle: f64 },
    Translate { offset: [f64; 3] },
    Scale { factor: f64 },
    /// Mirror `x -> -x` and/or `y -> -y`; images mirror horizontally when exactly one applies.
    Flip { x: bool, y: bool },
    /// Scale about the origin, rotate about the scaled image center, then crop
    /// back to the input size at `offset` (pixels in the scaled image).
    CameraAffine { scale: f64, angle: f64, offset: [f64; 2] },
    /// Factors applied in the order brightness, contrast, saturation, hue.
    ColorJitter { brightness: f64, contrast: f64, saturation: f64, hue: f64 },
    Jpeg { quality: u8 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub scope: Scope,
    pub transform: Transform,
}

/// Replayable list of sampled transforms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub seed: u64,
    pub steps: Vec<Step>,
}

impl AugmentationPlan {
    pub fn identity(seed: u64) -> Self {
        Self { seed, steps: Vec::new() }
    }

    pub fn is_identity(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Draws one plan for a rig of `cameras` images of size `height x width`.
pub fn sample_plan(seed: u64, config: &AugmentConfig, cameras: usize, height: usize, width: usize) -> Result<AugmentationPlan> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut steps = Vec::new();
    let mut push = |scope, transform| steps.push(Step { scope, transform });
    let range = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| if lo < hi { rng.gen_range(lo..=hi) } else { lo };

    if config.rotation {
        let r = config.rotation_range;
        push(Scope::Lidar, Transform::Rotate { angle: range(&mut rng, -r, r) });
    }
    if config.scaling {
        let [lo, hi] = config.scale_range;
        push(Scope::Lidar, Transform::Scale { factor: range(&mut rng, lo, hi) });
    }
    if config.translation {
        let s = config.translation_std;
        let offset = [0; 3].map(|_| s * rng.sample::<f64, _>(StandardNormal));
        push(Scope::Lidar, Transform::Translate { offset });
    }
    if config.flip {
        let x = rng.gen_bool(config.flip_prob);
        let y = rng.gen_bool(config.flip_prob);
        if x || y {
            push(Scope::Symmetric, Transform::Flip { x, y });
        }
    }
    for c in 0..cameras {
        let geometric = config.camera_scaling || config.camera_rotation || config.crop;
        if geometric {
            let scale = if config.camera_scaling {
                let [lo, hi] = config.camera_scale_range;
                range(&mut rng, lo, hi)
            } else {
                1.0
            };
            let angle = if config.camera_rotation {
                let r = config.camera_rotation_deg.to_radians();
                range(&mut rng, -r, r)
            } else {
                0.0
            };
            let spare = [(scale * width as f64).floor() - width as f64, (scale * height as f64).floor() - height as f64];
            let offset = if config.crop {
                spare.map(|s| rng.gen_range(0..=s.max(0.0) as u64) as f64)
            } else {
                spare.map(|s| (s.max(0.0) / 2.0).floor())
            };
            push(Scope::Camera(c), Transform::CameraAffine { scale, angle, offset });
        }
        if config.color_jitter {
            let f = |rng: &mut ChaCha8Rng, s: f64| range(rng, 1.0 - s, 1.0 + s);
            let transform = Transform::ColorJitter {
                brightness: f(&mut rng, config.brightness),
                contrast: f(&mut rng, config.contrast),
                saturation: f(&mut rng, config.saturation),
                hue: range(&mut rng, -config.hue, config.hue),
            };
            push(Scope::Camera(c), transform);
        }
        if config.jpeg && rng.gen_bool(config.jpeg_prob) {
            let [lo, hi] = config.jpeg_quality;
            push(Scope::Camera(c), Transform::Jpeg { quality: rng.gen_range(lo..=hi) });
        }
    }
    Ok(AugmentationPlan { seed, steps })
}
