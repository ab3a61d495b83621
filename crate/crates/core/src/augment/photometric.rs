/// Luma weights used for grayscale and contrast.
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

fn luma(rgb: [f64; 3]) -> f64 {
    LUMA[0] * rgb[0] + LUMA[1] * rgb[1] + LUMA[2] * rgb[2]
}

fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let h = if d == 0.0 {
        0.0
    } else if max == r {
        ((g - b) / d).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / d + 2.0) / 6.0
    } else {
        ((r - g) / d + 4.0) / 6.0
    };
    let s = if max == 0.0 { 0.0 } else { d / max };
    [h, s, max]
}

fn hsv_to_rgb([h, s, v]: [f64; 3]) -> [f64; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let c = v * s;
    let x = c * (1.0 - ((h6 % 2.0) - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match h6 as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [r + m, g + m, b + m]
}

/// Brightness, contrast, saturation and hue, in that order, each clamped to `[0, 1]`.
///
/// Contrast blends toward the mean luma of the whole plane; saturation
/// toward each pixel's own luma; hue shifts by `hue` turns.
pub fn color_jitter(plane: &mut [f32], brightness: f64, contrast: f64, saturation: f64, hue: f64) {
    let n = plane.len() / 3;
    let mut px: Vec<[f64; 3]> = (0..n).map(|i| [0, 1, 2].map(|c| f64::from(plane[c * n + i]))).collect();
    let clamp = |v: f64| v.clamp(0.0, 1.0);

    for p in &mut px {
        *p = p.map(|v| clamp(v * brightness));
    }
    let mean = px.iter().map(|&p| luma(p)).sum::<f64>() / n.max(1) as f64;
    for p in &mut px {
        *p = p.map(|v| clamp(contrast * v + (1.0 - contrast) * mean));
    }
    for p in &mut px {
        let g = luma(*p);
        *p = p.map(|v| clamp(saturation * v + (1.0 - saturation) * g));
    }
    if hue != 0.0 {
        for p in &mut px {
            let [h, s, v] = rgb_to_hsv(*p);
            *p = hsv_to_rgb([h + hue, s, v]).map(clamp);
        }
    }
    for (i, p) in px.iter().enumerate() {
        for c in 0..3 {
            plane[c * n + i] = p[c] as f32;
        }
    }
}
