//! Runs the sparse voxel backbone and the strided image backbone on one scene.

use fuseg3d::backbone::{BackboneConfig, ImageBackbone, ImageEncoder, VoxelBackbone, VoxelEncoder, VoxelInput};
use fuseg3d::geometry::{voxelize, DEFAULT_VOXEL_SIZE};
use fuseg3d::nn::ParamStore;
use fuseg3d::scene::{generate_scene, SceneSpec};
use fuseg3d::tensor::Tape;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> fuseg3d::Result<()> {
    let scene = generate_scene(5, &SceneSpec::default())?;
    let coord_scale = 0.1;
    let vset = voxelize(&scene.cloud.positions, &scene.cloud.input_features(coord_scale), DEFAULT_VOXEL_SIZE)?;
    let cfg = BackboneConfig::default();
    let input = VoxelInput::new(&vset, coord_scale, &cfg.levels)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut store = ParamStore::new();
    let voxel = VoxelBackbone::new(&mut store, input.features.cols(), &cfg, &mut rng);
    let image = ImageBackbone::new(&mut store, cfg.image_width, cfg.stride, &mut rng)?;
    println!("{} parameters in {} tensors", store.tensors().iter().map(|t| t.len()).sum::<usize>(), store.len());

    let mut tape = Tape::new();
    let bind = store.bind(&mut tape)?;
    let v = voxel.forward(&mut tape, &bind, &input)?;
    println!("voxel features {:?} from {} voxels", tape.value(v).shape(), input.len());
    let images = tape.constant(scene.images.to_tensor())?;
    let f = image.forward(&mut tape, &bind, images)?;
    println!("image maps {:?} from images {:?}", tape.value(f).shape(), tape.value(images).shape());
    Ok(())
}
