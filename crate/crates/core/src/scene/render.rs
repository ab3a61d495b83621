use crate::geometry::{CameraRig, PointCloud, ProjectionIndex};

use super::classes::{classify_color, BACKGROUND, PALETTE};
use super::shapes::World;
use super::ImageStack;

/// Renders every camera by casting one ray per pixel center and keeping the
/// nearest surface, which is what a depth-buffered rasterizer resolves to.
pub fn render_images(world: &World, rig: &CameraRig) -> ImageStack {
    let (h, w) = rig.image_size();
    let mut images = ImageStack::filled(rig.len(), h, w, BACKGROUND);
    for (c, cam) in rig.cameras.iter().enumerate() {
        for y in 0..h {
            for x in 0..w {
                let (o, d) = cam.pixel_ray(x as f64, y as f64);
                if let Some((_, class)) = world.cast(&o, &d, f64::INFINITY) {
                    images.set_pixel(c, y, x, PALETTE[class]);
                }
            }
        }
    }
    images
}

/// Outcome of comparing point labels with the colors under their pixels.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PaintReport {
    pub checked: usize,
    pub matched: usize,
}

impl PaintReport {
    pub fn fraction(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.matched as f64 / self.checked as f64
        }
    }

    pub fn merge(self, other: Self) -> Self {
        Self {
            checked: self.checked + other.checked,
            matched: self.matched + other.matched,
        }
    }
}

/// For every visible point, checks that the nearest pixel shows its class color.
pub fn paint_check(cloud: &PointCloud, projection: &ProjectionIndex, images: &ImageStack) -> PaintReport {
    let mut report = PaintReport::default();
    for (i, e) in projection.entries.iter().enumerate() {
        if let Some(p) = e {
            let (y, x) = images.nearest_pixel(p.u, p.v);
            report.checked += 1;
            if classify_color(images.pixel(p.camera, y, x)) == Some(cloud.labels[i]) {
                report.matched += 1;
            }
        }
    }
    report
}
