//! Geometry-based fusion of paired point features, then class embeddings from
//! both modalities and the semantic fusion blocks that attend over them.

use fuseg3d::fusion::{CameraSfam, FusionConfig, Gffm, LidarSfam, Sffm};
use fuseg3d::nn::ParamStore;
use fuseg3d::scene::NUM_CLASSES;
use fuseg3d::tensor::{Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> fuseg3d::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = FusionConfig::default();
    let (lidar_w, cam_w, points, voxels) = (32, 32, 500, 300);

    let mut store = ParamStore::new();
    let gffm = Gffm::new(&mut store, lidar_w, cam_w, &cfg, &mut rng);
    let lidar = LidarSfam::new(&mut store, lidar_w, NUM_CLASSES, &mut rng);
    let camera = CameraSfam::new(&mut store, cam_w, NUM_CLASSES, &mut rng);
    let sffm = Sffm::new(&mut store, [cfg.gfused_width, lidar_w, cam_w], &cfg, &mut rng)?;

    let mut tape = Tape::new();
    let bind = store.bind(&mut tape)?;
    let f_lidar = tape.constant(Tensor::randn([points, lidar_w], 1.0, &mut rng))?;
    let f_cam = tape.constant(Tensor::randn([points, cam_w], 1.0, &mut rng))?;
    let voxel_feats = tape.constant(Tensor::randn([voxels, lidar_w], 1.0, &mut rng))?;
    let maps = tape.constant(Tensor::randn([5, cam_w, 16, 16], 1.0, &mut rng))?;

    let f_gfused = gffm.forward(&mut tape, &bind, f_lidar, f_cam)?;
    let l = lidar.forward(&mut tape, &bind, voxel_feats)?;
    let c = camera.forward(&mut tape, &bind, maps)?;
    let out = sffm.forward(&mut tape, &bind, f_gfused, l.embeddings, c.embeddings)?;

    println!("F_gfused {:?}", tape.value(f_gfused).shape());
    println!("LiDAR class embeddings {:?}, camera class embeddings {:?}", tape.value(l.embeddings).shape(), tape.value(c.embeddings).shape());
    println!("F_sfused {:?} after {} attention maps", tape.value(out.features).shape(), out.attention.len());
    let worst = out
        .attention
        .iter()
        .chain([&l.distribution, &c.distribution])
        .flat_map(|&a| {
            let t = tape.value(a);
            (0..t.rows()).map(|i| (t.row(i).iter().sum::<f64>() - 1.0).abs()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    println!("every attention and class distribution row sums to 1 (worst error {worst:.1e})");
    Ok(())
}
