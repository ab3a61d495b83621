use nalgebra::{Isometry3, Point3, Vector3};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{CameraRig, Frame, PointCloud};

use super::classes::*;
use super::shapes::{Object, Shape, World};
use super::{render_images, SceneBundle, SceneSpec};

/// Retries with a fresh layout when a class cannot reach its point target.
const LAYOUT_ATTEMPTS: usize = 8;
/// Placement tries per object before the layout is abandoned.
const PLACEMENT_TRIES: usize = 200;
/// Densification rounds; each doubles both beam and azimuth counts.
const DENSIFY_ROUNDS: u32 = 2;
/// Fraction of the placement annulus available to objects smaller than a truck.
const SMALL_OBJECT_REACH: f64 = 0.65;

/// Generates one scene with the current sweep only.
pub fn generate_scene(seed: u64, spec: &SceneSpec) -> Result<SceneBundle> {
    generate_sequence(seed, spec, 1)
}

/// Generates one scene whose sensor drove forward through a static world,
/// keeping `frames - 1` earlier sweeps.
pub fn generate_sequence(seed: u64, spec: &SceneSpec, frames: usize) -> Result<SceneBundle> {
    spec.validate()?;
    if frames == 0 {
        return Err(Error::InvalidArgument("frame count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let path = spec.sweep_step * (frames - 1) as f64;
    let mut last = None;
    for _ in 0..LAYOUT_ATTEMPTS {
        let world = match random_world(&mut rng, spec, path) {
            Ok(w) => w,
            Err(e) => {
                last = Some(e);
                continue;
            }
        };
        match build_scene(&mut rng, seed, spec, world, frames) {
            Ok(s) => return Ok(s),
            Err(e @ Error::Generation(_)) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Generation("no attempts made".into())))
}

/// Generates a scene over a given set of objects (no layout retries).
pub fn generate_scene_with_objects(seed: u64, spec: &SceneSpec, objects: Vec<Object>) -> Result<SceneBundle> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let world = World { ground_z: -spec.sensor_height, objects };
    build_scene(&mut rng, seed, spec, world, 1)
}

pub fn spec_rig(spec: &SceneSpec) -> Result<CameraRig> {
    CameraRig::ring(
        spec.num_cameras,
        spec.camera_coverage_deg.to_radians(),
        [0.0; 3],
        spec.camera_pitch_deg.to_radians(),
        spec.image_width,
        spec.image_height,
    )
}

fn build_scene(rng: &mut ChaCha8Rng, seed: u64, spec: &SceneSpec, world: World, frames: usize) -> Result<SceneBundle> {
    let rig = spec_rig(spec)?;
    let cloud = scan(rng, spec, &world, Point3::origin())?;
    let mut history = Vec::new();
    for k in 1..frames {
        let x = -(k as f64) * spec.sweep_step;
        let pose = Isometry3::translation(x, 0.0, 0.0);
        let local = scan(rng, spec, &world, Point3::new(x, 0.0, 0.0))?;
        history.push(Frame { cloud: local, pose });
    }
    let images = render_images(&world, &rig);
    Ok(SceneBundle {
        id: format!("scene-{seed:016x}"),
        seed,
        cloud,
        images,
        rig,
        ego_pose: Isometry3::identity(),
        history,
    })
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

fn sample_shape(rng: &mut ChaCha8Rng, class: usize, xy: [f64; 2], ground: f64) -> Shape {
    let yaw = uniform(rng, -std::f64::consts::PI, std::f64::consts::PI);
    let boxed = |rng: &mut ChaCha8Rng, l: (f64, f64), w: (f64, f64), h: (f64, f64)| {
        let half = [uniform(rng, l.0, l.1) / 2.0, uniform(rng, w.0, w.1) / 2.0, uniform(rng, h.0, h.1) / 2.0];
        Shape::Box { center: [xy[0], xy[1], ground + half[2]], half, yaw }
    };
    match class {
        BUILDING => boxed(rng, (8.0, 14.0), (5.0, 9.0), (5.0, 10.0)),
        VEHICLE => boxed(rng, (4.2, 5.0), (2.0, 2.4), (1.7, 2.1)),
        TRUCK => boxed(rng, (7.0, 9.0), (2.6, 3.0), (3.2, 3.8)),
        BARRIER => boxed(rng, (4.0, 7.0), (0.8, 1.1), (1.6, 2.0)),
        CLUTTER => boxed(rng, (1.4, 2.0), (1.4, 2.0), (1.2, 1.7)),
        SPHERE => {
            let radius = uniform(rng, 1.2, 1.7);
            Shape::Sphere { center: [xy[0], xy[1], ground + radius], radius }
        }
        CYLINDER => Shape::Cylinder {
            base: [xy[0], xy[1], ground],
            radius: uniform(rng, 0.8, 1.2),
            height: uniform(rng, 2.5, 4.5),
        },
        _ => unreachable!("ground is not placed"),
    }
}

/// Places objects in the annulus, keeping footprints apart and clear of the
/// sensor path `x in [-path, 0]`, `y = 0`.
fn random_world(rng: &mut ChaCha8Rng, spec: &SceneSpec, path: f64) -> Result<World> {
    let ground = -spec.sensor_height;
    let mut objects: Vec<Object> = Vec::new();
    // Large objects first so small ones fill the gaps.
    for class in [BUILDING, TRUCK, VEHICLE, BARRIER, CYLINDER, SPHERE, CLUTTER] {
        for _ in 0..spec.objects.for_class(class) {
            let mut placed = false;
            // Small objects stay near enough to collect a useful number of returns.
            let reach = if matches!(class, BUILDING | TRUCK) {
                spec.max_radius
            } else {
                spec.min_radius + SMALL_OBJECT_REACH * (spec.max_radius - spec.min_radius)
            };
            for _ in 0..PLACEMENT_TRIES {
                let r = uniform(rng, spec.min_radius, reach);
                let az = uniform(rng, -std::f64::consts::PI, std::f64::consts::PI);
                let shape = sample_shape(rng, class, [r * az.cos(), r * az.sin()], ground);
                let (c, rad) = shape.footprint();
                let px = c[0].clamp(-path, 0.0);
                let clear_path = (c[0] - px).hypot(c[1]) > rad + 1.5;
                let clear = objects.iter().all(|o| {
                    let (oc, orad) = o.shape.footprint();
                    (c[0] - oc[0]).hypot(c[1] - oc[1]) > rad + orad + 0.5
                });
                if clear_path && clear {
                    objects.push(Object { class, shape });
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::Generation(format!(
                    "could not place a {} after {PLACEMENT_TRIES} tries",
                    CLASS_NAMES[class]
                )));
            }
        }
    }
    Ok(World { ground_z: ground, objects })
}

struct Hit {
    position: [f64; 3],
    class: usize,
}

fn cast_rays(spec: &SceneSpec, world: &World, origin: Point3<f64>, beams: usize, azimuth_steps: usize) -> Vec<Hit> {
    let mut hits = Vec::new();
    for b in 0..beams {
        let el = (spec.beam_min_deg + (spec.beam_max_deg - spec.beam_min_deg) * b as f64 / (beams - 1) as f64)
            .to_radians();
        for a in 0..azimuth_steps {
            let az = std::f64::consts::TAU * a as f64 / azimuth_steps as f64;
            let d = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
            if let Some((t, class)) = world.cast(&origin, &d, spec.max_range) {
                let p = origin + d * t - origin.coords;
                hits.push(Hit { position: [p.x, p.y, p.z], class });
            }
        }
    }
    hits
}

/// Casts the LiDAR from `origin` and subsamples hits to the class targets.
/// Returned positions are relative to `origin`, rounded to 32-bit floats so a
/// saved scene reloads bit-identically.
fn scan(rng: &mut ChaCha8Rng, spec: &SceneSpec, world: &World, origin: Point3<f64>) -> Result<PointCloud> {
    let targets = spec.class_targets();
    let (mut beams, mut steps) = (spec.beams, spec.azimuth_steps);
    let mut round = 0;
    let pools = loop {
        let hits = cast_rays(spec, world, origin, beams, steps);
        let mut pools: Vec<Vec<Hit>> = (0..NUM_CLASSES).map(|_| Vec::new()).collect();
        for h in hits {
            pools[h.class].push(h);
        }
        let short = (0..NUM_CLASSES).find(|&c| pools[c].len() < targets[c]);
        match short {
            None => break pools,
            Some(c) if round == DENSIFY_ROUNDS => {
                return Err(Error::Generation(format!(
                    "class {} has {} hits for a target of {}",
                    CLASS_NAMES[c],
                    pools[c].len(),
                    targets[c]
                )));
            }
            Some(_) => {
                beams = 2 * beams - 1;
                steps *= 2;
                round += 1;
            }
        }
    };
    let mut chosen: Vec<(usize, usize)> = Vec::with_capacity(spec.num_points);
    for (c, pool) in pools.iter().enumerate() {
        let mut idx = sample(rng, pool.len(), targets[c]).into_vec();
        idx.sort_unstable();
        chosen.extend(idx.into_iter().map(|i| (c, i)));
    }
    // Interleave classes in scan order rather than grouping them.
    let order_key = |&(c, i): &(usize, usize)| {
        let p = pools[c][i].position;
        (p[1].atan2(p[0]), p[2])
    };
    chosen.sort_by(|a, b| {
        let (ka, kb) = (order_key(a), order_key(b));
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    });
    let mut positions = Vec::with_capacity(chosen.len());
    let mut attributes = Vec::with_capacity(chosen.len());
    let mut labels = Vec::with_capacity(chosen.len());
    for (c, i) in chosen {
        let p = pools[c][i].position.map(|v| f64::from(v as f32));
        let noise: f64 = rng.sample(StandardNormal);
        let refl = (REFLECTANCE[c] + spec.reflectance_noise * noise).clamp(0.0, 1.0);
        positions.push(p);
        attributes.push(f64::from(refl as f32));
        labels.push(pools[c][i].class);
    }
    PointCloud::new(positions, attributes, 1, labels)
}
