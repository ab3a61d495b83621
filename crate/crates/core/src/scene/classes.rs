//! Fixed class catalogue of the synthetic world.

/// Number of classes including the ignored one.
pub const NUM_CLASSES: usize = 8;
/// Label excluded from losses and metrics.
pub const IGNORE: usize = 0;

pub const CLUTTER: usize = 0;
pub const GROUND: usize = 1;
pub const BUILDING: usize = 2;
pub const VEHICLE: usize = 3;
pub const TRUCK: usize = 4;
pub const SPHERE: usize = 5;
pub const CYLINDER: usize = 6;
pub const BARRIER: usize = 7;

pub const CLASS_NAMES: [&str; NUM_CLASSES] = [
    "clutter", "ground", "building", "vehicle", "truck", "sphere", "cylinder", "barrier",
];

/// Mean reflectance per class. Pairs share a value on purpose, so the
/// LiDAR branch has to rely on shape to separate them.
pub const REFLECTANCE: [f64; NUM_CLASSES] = [0.65, 0.2, 0.5, 0.8, 0.8, 0.35, 0.35, 0.5];

/// Render color per class: four hues 90 degrees apart at two brightness levels.
pub const PALETTE: [[f32; 3]; NUM_CLASSES] = [
    hsv(0.0, 0.85, 0.5),
    hsv(90.0, 0.85, 0.5),
    hsv(180.0, 0.85, 0.5),
    hsv(0.0, 0.85, 0.95),
    hsv(270.0, 0.85, 0.95),
    hsv(90.0, 0.85, 0.95),
    hsv(180.0, 0.85, 0.95),
    hsv(270.0, 0.85, 0.5),
];

/// Sky and anything else that is not a surface.
pub const BACKGROUND: [f32; 3] = [0.5, 0.5, 0.5];

const fn hsv(h: f32, s: f32, v: f32) -> [f32; 3] {
    // Only multiples of 90 degrees are used, which keeps this const-evaluable.
    let c = v * s;
    let m = v - c;
    let sector = (h / 90.0) as u32;
    match sector {
        0 => [v, m, m],
        1 => [m + c * 0.5, v, m],
        2 => [m, m + c * 0.5, v],
        _ => [m + c * 0.5, m, v],
    }
}

/// Nearest palette entry to an RGB value, `None` when the background is nearest.
pub fn classify_color(rgb: [f32; 3]) -> Option<usize> {
    let d2 = |p: &[f32; 3]| (0..3).map(|i| (p[i] - rgb[i]).powi(2)).sum::<f32>();
    let mut best = (d2(&BACKGROUND), None);
    for (k, p) in PALETTE.iter().enumerate() {
        let d = d2(p);
        if d < best.0 {
            best = (d, Some(k));
        }
    }
    best.1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_is_injective_and_round_trips() {
        for (k, p) in PALETTE.iter().enumerate() {
            assert_eq!(classify_color(*p), Some(k));
            for q in &PALETTE[k + 1..] {
                assert_ne!(p, q);
            }
        }
        assert_eq!(classify_color(BACKGROUND), None);
    }
}
