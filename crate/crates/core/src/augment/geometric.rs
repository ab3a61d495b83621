use crate::geometry::ProjectionIndex;
use crate::scene::ImageStack;

/// Yaw about `+z`.
pub fn rotate_points(points: &mut [[f64; 3]], angle: f64) {
    let (s, c) = angle.sin_cos();
    for p in points {
        let [x, y, z] = *p;
        *p = [c * x - s * y, s * x + c * y, z];
    }
}

pub fn translate_points(points: &mut [[f64; 3]], offset: [f64; 3]) {
    for p in points {
        for k in 0..3 {
            p[k] += offset[k];
        }
    }
}

pub fn scale_points(points: &mut [[f64; 3]], factor: f64) {
    for p in points.iter_mut().flatten() {
        *p *= factor;
    }
}

pub fn flip_points(points: &mut [[f64; 3]], x: bool, y: bool) {
    for p in points {
        if x {
            p[0] = -p[0];
        }
        if y {
            p[1] = -p[1];
        }
    }
}

/// Mirrors every image left to right together with the stored `u` coordinates.
///
/// Entries that land left of the first column (the half-pixel strip past the
/// last pixel center) lose their camera hit.
pub fn mirror_images(images: &mut ImageStack, projection: &mut ProjectionIndex) {
    let w = images.width;
    for plane in images.data.chunks_exact_mut(w) {
        plane.reverse();
    }
    for e in &mut projection.entries {
        if let Some(p) = e {
            p.u = (w - 1) as f64 - p.u;
            if p.u < 0.0 {
                *e = None;
            }
        }
    }
}

/// Pixel-space affine map `q = M p + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine2 {
    pub m: [[f64; 2]; 2],
    pub t: [f64; 2],
}

impl Affine2 {
    /// Scale about the origin, rotate by `angle` about the scaled image center,
    /// then shift by `-offset`.
    pub fn camera(scale: f64, angle: f64, offset: [f64; 2], height: usize, width: usize) -> Self {
        let (s, c) = angle.sin_cos();
        let m = [[scale * c, -scale * s], [scale * s, scale * c]];
        let center = [(width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0];
        // q = s R (p - center) + s center - offset
        let t = [0, 1].map(|i| scale * center[i] - offset[i] - (m[i][0] * center[0] + m[i][1] * center[1]));
        Self { m, t }
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [0, 1].map(|i| self.m[i][0] * p[0] + self.m[i][1] * p[1] + self.t[i])
    }

    pub fn inverse(&self) -> Self {
        let [[a, b], [c, d]] = self.m;
        let det = a * d - b * c;
        let m = [[d / det, -b / det], [-c / det, a / det]];
        let t = [0, 1].map(|i| -(m[i][0] * self.t[0] + m[i][1] * self.t[1]));
        Self { m, t }
    }
}

/// Warps one camera's `[3, H, W]` plane in place. Output pixels whose source
/// falls outside the original image extent are filled with zeros.
pub fn warp_plane(plane: &mut [f32], height: usize, width: usize, map: &Affine2) {
    let src = plane.to_vec();
    let inv = map.inverse();
    let hw = height * width;
    let (wmax, hmax) = ((width - 1) as f64, (height - 1) as f64);
    for y in 0..height {
        for x in 0..width {
            let [u, v] = inv.apply([x as f64, y as f64]);
            let o = y * width + x;
            if !(-0.5..=wmax + 0.5).contains(&u) || !(-0.5..=hmax + 0.5).contains(&v) {
                for ch in 0..3 {
                    plane[ch * hw + o] = 0.0;
                }
                continue;
            }
            let (u, v) = (u.clamp(0.0, wmax), v.clamp(0.0, hmax));
            let (x0, y0) = (u.floor() as usize, v.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(width - 1), (y0 + 1).min(height - 1));
            let (fx, fy) = (u - x0 as f64, v - y0 as f64);
            for ch in 0..3 {
                let at = |yy: usize, xx: usize| f64::from(src[ch * hw + yy * width + xx]);
                let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                plane[ch * hw + o] = (top * (1.0 - fy) + bottom * fy) as f32;
            }
        }
    }
}

/// Moves the pixel coordinates of one camera's points and re-evaluates visibility.
pub fn warp_projection(projection: &mut ProjectionIndex, camera: usize, map: &Affine2, height: usize, width: usize) {
    for e in &mut projection.entries {
        if let Some(p) = e.as_mut().filter(|p| p.camera == camera) {
            let [u, v] = map.apply([p.u, p.v]);
            if (0.0..width as f64).contains(&u) && (0.0..height as f64).contains(&v) {
                p.u = u;
                p.v = v;
            } else {
                *e = None;
            }
        }
    }
}
