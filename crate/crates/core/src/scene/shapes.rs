use nalgebra::{Point3, Vector3};

const T_MIN: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    /// Box rotated by `yaw` about the vertical axis through its center.
    Box { center: [f64; 3], half: [f64; 3], yaw: f64 },
    Sphere { center: [f64; 3], radius: f64 },
    /// Vertical capped cylinder standing on `base`.
    Cylinder { base: [f64; 3], radius: f64, height: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Object {
    pub class: usize,
    pub shape: Shape,
}

impl Shape {
    /// Horizontal center and a radius bounding the footprint.
    pub fn footprint(&self) -> ([f64; 2], f64) {
        match *self {
            Shape::Box { center, half, .. } => ([center[0], center[1]], half[0].hypot(half[1])),
            Shape::Sphere { center, radius } => ([center[0], center[1]], radius),
            Shape::Cylinder { base, radius, .. } => ([base[0], base[1]], radius),
        }
    }

    /// Smallest ray parameter `t > 0` with `o + t d` on the surface.
    pub fn intersect(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<f64> {
        match *self {
            Shape::Box { center, half, yaw } => {
                let (s, c) = (-yaw).sin_cos();
                let rel = o - Point3::from(center);
                let lo = Vector3::new(c * rel.x - s * rel.y, s * rel.x + c * rel.y, rel.z);
                let ld = Vector3::new(c * d.x - s * d.y, s * d.x + c * d.y, d.z);
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                for a in 0..3 {
                    if ld[a].abs() < 1e-15 {
                        if lo[a].abs() > half[a] {
                            return None;
                        }
                        continue;
                    }
                    let ta = (-half[a] - lo[a]) / ld[a];
                    let tb = (half[a] - lo[a]) / ld[a];
                    t0 = t0.max(ta.min(tb));
                    t1 = t1.min(ta.max(tb));
                }
                nearest(t0, t1)
            }
            Shape::Sphere { center, radius } => {
                let oc = o - Point3::from(center);
                let a = d.norm_squared();
                let b = oc.dot(d);
                let disc = b * b - a * (oc.norm_squared() - radius * radius);
                if disc < 0.0 {
                    return None;
                }
                let r = disc.sqrt();
                nearest((-b - r) / a, (-b + r) / a)
            }
            Shape::Cylinder { base, radius, height } => {
                let (z0, z1) = (base[2], base[2] + height);
                let (ox, oy) = (o.x - base[0], o.y - base[1]);
                let mut best: Option<f64> = None;
                let mut keep = |t: f64| {
                    if t > T_MIN && best.is_none_or(|b| t < b) {
                        best = Some(t);
                    }
                };
                let a = d.x * d.x + d.y * d.y;
                if a > 1e-15 {
                    let b = ox * d.x + oy * d.y;
                    let disc = b * b - a * (ox * ox + oy * oy - radius * radius);
                    if disc >= 0.0 {
                        let r = disc.sqrt();
                        for t in [(-b - r) / a, (-b + r) / a] {
                            let z = o.z + t * d.z;
                            if (z0..=z1).contains(&z) {
                                keep(t);
                            }
                        }
                    }
                }
                if d.z.abs() > 1e-15 {
                    for zc in [z0, z1] {
                        let t = (zc - o.z) / d.z;
                        let (x, y) = (ox + t * d.x, oy + t * d.y);
                        if x * x + y * y <= radius * radius {
                            keep(t);
                        }
                    }
                }
                best
            }
        }
    }
}

fn nearest(t0: f64, t1: f64) -> Option<f64> {
    if t0 > t1 {
        None
    } else if t0 > T_MIN {
        Some(t0)
    } else if t1 > T_MIN {
        Some(t1)
    } else {
        None
    }
}

/// Ground plane plus objects.
#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub ground_z: f64,
    pub objects: Vec<Object>,
}

impl World {
    /// First surface hit within `max_t`: ray parameter and class.
    pub fn cast(&self, o: &Point3<f64>, d: &Vector3<f64>, max_t: f64) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        if d.z < 0.0 {
            let t = (self.ground_z - o.z) / d.z;
            if t > T_MIN && t <= max_t {
                best = Some((t, super::classes::GROUND));
            }
        }
        for obj in &self.objects {
            if let Some(t) = obj.shape.intersect(o, d) {
                if t <= max_t && best.is_none_or(|(b, _)| t < b) {
                    best = Some((t, obj.class));
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hit(s: &Shape, o: [f64; 3], d: [f64; 3]) -> Option<f64> {
        s.intersect(&Point3::from(o), &Vector3::from(d))
    }

    #[test]
    fn primitive_intersections() {
        let b = Shape::Box { center: [5.0, 0.0, 0.0], half: [1.0, 1.0, 1.0], yaw: 0.0 };
        assert!((hit(&b, [0.0; 3], [1.0, 0.0, 0.0]).unwrap() - 4.0).abs() < 1e-12);
        let r = Shape::Box { center: [5.0, 0.0, 0.0], half: [1.0, 1.0, 1.0], yaw: std::f64::consts::FRAC_PI_4 };
        assert!((hit(&r, [0.0; 3], [1.0, 0.0, 0.0]).unwrap() - (5.0 - 2f64.sqrt())).abs() < 1e-12);
        assert!(hit(&b, [0.0; 3], [-1.0, 0.0, 0.0]).is_none());

        let s = Shape::Sphere { center: [0.0, 3.0, 0.0], radius: 1.0 };
        assert!((hit(&s, [0.0; 3], [0.0, 1.0, 0.0]).unwrap() - 2.0).abs() < 1e-12);

        let c = Shape::Cylinder { base: [4.0, 0.0, -1.0], radius: 0.5, height: 2.0 };
        assert!((hit(&c, [0.0; 3], [1.0, 0.0, 0.0]).unwrap() - 3.5).abs() < 1e-12);
        // Straight down onto the top cap.
        assert!((hit(&c, [4.0, 0.0, 3.0], [0.0, 0.0, -1.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!(hit(&c, [0.0, 0.0, 2.0], [1.0, 0.0, 0.0]).is_none());
    }
}
