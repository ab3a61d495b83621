//! Small trainable feature extractors behind replaceable interfaces.

use rand::Rng;
use serde::{Deserialize, Serialize};

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::geometry::SparseVoxelSet;
use crate::nn::{Binding, Linear, Mlp, ParamId, ParamStore};
use crate::tensor::{SparseRows, Tape, Tensor, Var};

/// Per-voxel inputs and the neighborhood operator the voxel network mixes with.
#[derive(Clone, Debug)]
pub struct VoxelInput {
    /// `[N_voxel, C_in]`.
    pub features: Tensor,
    /// Row `v` averages the occupied 26-neighbors of voxel `v`; empty when it has none.
    pub neighbor_mean: SparseRows,
    /// Successively coarser grids, each built from the one before it.
    pub levels: Vec<CoarseLevel>,
}

/// One coarser grid: cells of `factor` finer cells per axis.
#[derive(Clone, Debug)]
pub struct CoarseLevel {
    /// Cell rows averaging their member rows of the finer grid.
    pub pool: SparseRows,
    /// Finer rows copying their parent cell.
    pub unpool: SparseRows,
    /// 26-neighbor mean on this grid.
    pub neighbor_mean: SparseRows,
}

fn neighbor_mean(coords: &[[i64; 3]]) -> SparseRows {
    let lookup: HashMap<[i64; 3], usize> = coords.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let mut out = SparseRows::new(coords.len());
    for c in coords {
        let mut found = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if (dx, dy, dz) == (0, 0, 0) {
                        continue;
                    }
                    if let Some(&j) = lookup.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        found.push(j);
                    }
                }
            }
        }
        let w = 1.0 / found.len().max(1) as f64;
        out.push_row(found.into_iter().map(|j| (j, w)));
    }
    out
}

/// Parent cells of `coords` sorted by coordinate, plus the parent of each input cell.
fn coarsen(coords: &[[i64; 3]], factor: i64) -> (Vec<[i64; 3]>, Vec<usize>) {
    let parents: Vec<[i64; 3]> = coords.iter().map(|c| c.map(|x| x.div_euclid(factor))).collect();
    let index: BTreeMap<[i64; 3], usize> =
        parents.iter().copied().collect::<std::collections::BTreeSet<_>>().into_iter().enumerate().map(|(i, c)| (c, i)).collect();
    let assign = parents.iter().map(|c| index[c]).collect();
    (index.into_keys().collect(), assign)
}

impl VoxelInput {
    /// Member-mean point features of each voxel followed by the offset of the
    /// member-mean position from the voxel center, in voxel units.
    ///
    /// `vset.features` must start with the point coordinates multiplied by `coord_scale`.
    /// `factors` lists the coarsening step of each extra grid.
    pub fn new(vset: &SparseVoxelSet, coord_scale: f64, factors: &[usize]) -> Result<Self> {
        if vset.is_empty() {
            return Err(Error::Empty("voxel backbone needs at least one voxel"));
        }
        let c = vset.features.cols();
        if c < 3 || coord_scale == 0.0 {
            return Err(Error::InvalidArgument("voxel features must start with scaled coordinates".into()));
        }
        let d = vset.voxel_size;
        let mut data = Vec::with_capacity(vset.len() * (c + 3));
        for v in 0..vset.len() {
            let row = vset.features.row(v);
            data.extend_from_slice(row);
            let center = vset.center(v);
            data.extend((0..3).map(|k| (row[k] / coord_scale - center[k]) / d));
        }
        let features = Tensor::new(vec![vset.len(), c + 3], data)?;
        let mut levels = Vec::with_capacity(factors.len());
        let mut coords = vset.coords.clone();
        for &f in factors {
            if f < 2 {
                return Err(Error::InvalidArgument(format!("coarsening factor must be at least 2, got {f}")));
            }
            let (parents, assign) = coarsen(&coords, f as i64);
            levels.push(CoarseLevel {
                pool: SparseRows::group_mean(&assign, parents.len())?,
                unpool: SparseRows::gather(&assign, parents.len()),
                neighbor_mean: neighbor_mean(&parents),
            });
            coords = parents;
        }
        Ok(Self { features, neighbor_mean: neighbor_mean(&vset.coords), levels })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same voxels in a new order: row `i` of the result is row `order[i]` here.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut inverse = vec![0; order.len()];
        for (i, &o) in order.iter().enumerate() {
            inverse[o] = i;
        }
        let mut neighbor_mean = SparseRows::new(order.len());
        for &o in order {
            neighbor_mean.push_row(self.neighbor_mean.row(o).map(|(j, w)| (inverse[j], w)).collect::<Vec<_>>());
        }
        let mut levels = self.levels.clone();
        if let Some(first) = levels.first_mut() {
            let mut pool = SparseRows::new(order.len());
            for r in 0..first.pool.rows() {
                pool.push_row(first.pool.row(r).map(|(j, w)| (inverse[j], w)).collect::<Vec<_>>());
            }
            let mut unpool = SparseRows::new(first.unpool.source_rows());
            for &o in order {
                unpool.push_row(first.unpool.row(o).collect::<Vec<_>>());
            }
            first.pool = pool;
            first.unpool = unpool;
        }
        let c = self.features.cols();
        let data = order.iter().flat_map(|&o| self.features.row(o).to_vec()).collect();
        Self { features: Tensor::new(vec![order.len(), c], data).expect("same width"), neighbor_mean, levels }
    }
}

/// Anything that maps voxels to `[N_voxel, width]` features.
pub trait VoxelEncoder {
    fn width(&self) -> usize;
    fn forward(&self, tape: &mut Tape, bind: &Binding, input: &VoxelInput) -> Result<Var>;
}

/// Anything that maps `[N_cam, 3, H_in, W_in]` images to `[N_cam, width, H_in/s, W_in/s]` maps.
pub trait ImageEncoder {
    fn width(&self) -> usize;
    fn stride(&self) -> usize;
    fn forward(&self, tape: &mut Tape, bind: &Binding, images: Var) -> Result<Var>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackboneConfig {
    pub voxel_width: usize,
    pub image_width: usize,
    pub stride: usize,
    /// Neighborhood aggregation rounds of the voxel network, per grid.
    pub rounds: usize,
    /// Coarsening factor of each extra voxel grid.
    pub levels: Vec<usize>,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self { voxel_width: 32, image_width: 32, stride: 4, rounds: 2, levels: vec![4, 4] }
    }
}

/// Per-voxel MLP followed by residual rounds `h += gelu(mean_neighbors(h) W)`
/// on the voxel grid and on each coarser grid. Coarse features are pooled on
/// the way down and added back as `h += gelu(parent(c) U)` on the way up.
///
/// No layer after the MLP carries a bias, so without coarse grids a voxel
/// without neighbors keeps its MLP output.
#[derive(Clone, Debug)]
pub struct VoxelBackbone {
    pub mlp: Mlp,
    pub rounds: Vec<Linear>,
    /// Per coarse grid: its rounds and the projection back to the finer grid.
    pub levels: Vec<(Vec<Linear>, Linear)>,
    width: usize,
}

impl VoxelBackbone {
    pub fn new(store: &mut ParamStore, input: usize, cfg: &BackboneConfig, rng: &mut impl Rng) -> Self {
        let width = cfg.voxel_width;
        let mlp = Mlp::new(store, "voxel.mlp", [input, width, width], rng);
        let rounds_at = |store: &mut ParamStore, prefix: &str, rng: &mut _| -> Vec<Linear> {
            (0..cfg.rounds).map(|r| Linear::new(store, &format!("{prefix}.round{r}"), width, width, false, rng)).collect()
        };
        let rounds = rounds_at(store, "voxel", rng);
        let levels = (0..cfg.levels.len())
            .map(|l| {
                let prefix = format!("voxel.level{l}");
                let r = rounds_at(store, &prefix, rng);
                (r, Linear::new(store, &format!("{prefix}.up"), width, width, false, rng))
            })
            .collect();
        Self { mlp, rounds, levels, width }
    }
}

fn mix_rounds(tape: &mut Tape, bind: &Binding, mut h: Var, layers: &[Linear], neighbors: &SparseRows) -> Result<Var> {
    for layer in layers {
        let m = tape.sparse_mix(h, neighbors.clone())?;
        let m = layer.forward(tape, bind, m)?;
        let m = tape.gelu(m)?;
        h = tape.add(h, m)?;
    }
    Ok(h)
}

impl VoxelEncoder for VoxelBackbone {
    fn width(&self) -> usize {
        self.width
    }

    fn forward(&self, tape: &mut Tape, bind: &Binding, input: &VoxelInput) -> Result<Var> {
        if input.is_empty() {
            return Err(Error::Empty("voxel backbone needs at least one voxel"));
        }
        if input.levels.len() != self.levels.len() {
            return Err(Error::InvalidArgument(format!(
                "voxel input has {} coarse grids, the network expects {}",
                input.levels.len(),
                self.levels.len()
            )));
        }
        let x = tape.constant(input.features.clone())?;
        let h = self.mlp.forward(tape, bind, x)?;
        let mut stack = vec![mix_rounds(tape, bind, h, &self.rounds, &input.neighbor_mean)?];
        for ((layers, _), grid) in self.levels.iter().zip(&input.levels) {
            let c = tape.sparse_mix(*stack.last().expect("non-empty"), grid.pool.clone())?;
            stack.push(mix_rounds(tape, bind, c, layers, &grid.neighbor_mean)?);
        }
        for l in (0..self.levels.len()).rev() {
            let up = tape.sparse_mix(stack[l + 1], input.levels[l].unpool.clone())?;
            let up = self.levels[l].1.forward(tape, bind, up)?;
            let up = tape.gelu(up)?;
            stack[l] = tape.add(stack[l], up)?;
        }
        Ok(stack[0])
    }
}

/// Patchify convolution (kernel = stride = `s`), GELU, then a 1x1 convolution.
#[derive(Clone, Debug)]
pub struct ImageBackbone {
    pub patch: (ParamId, ParamId),
    pub mix: (ParamId, ParamId),
    width: usize,
    stride: usize,
}

impl ImageBackbone {
    pub fn new(store: &mut ParamStore, width: usize, stride: usize, rng: &mut impl Rng) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Config("image stride must be positive".into()));
        }
        let fan = (3 * stride * stride) as f64;
        let patch = (
            store.add("image.patch.weight", Tensor::randn([width, 3, stride, stride], fan.recip().sqrt(), rng)),
            store.add("image.patch.bias", Tensor::zeros([width])),
        );
        let mix = (
            store.add("image.mix.weight", Tensor::randn([width, width, 1, 1], (width as f64).recip().sqrt(), rng)),
            store.add("image.mix.bias", Tensor::zeros([width])),
        );
        Ok(Self { patch, mix, width, stride })
    }
}

impl ImageEncoder for ImageBackbone {
    fn width(&self) -> usize {
        self.width
    }

    fn stride(&self) -> usize {
        self.stride
    }

    fn forward(&self, tape: &mut Tape, bind: &Binding, images: Var) -> Result<Var> {
        let shape = tape.value(images).shape().to_vec();
        let [_, 3, h, w] = shape[..] else {
            return Err(Error::shape("image_backbone", format!("expected [N, 3, H, W], got {shape:?}")));
        };
        let s = self.stride;
        if h % s != 0 || w % s != 0 {
            return Err(Error::InvalidArgument(format!("image size {h}x{w} is not divisible by stride {s}")));
        }
        let x = tape.conv2d(images, bind.var(self.patch.0), Some(bind.var(self.patch.1)), s, 0)?;
        let x = tape.gelu(x)?;
        tape.conv2d(x, bind.var(self.mix.0), Some(bind.var(self.mix.1)), 1, 0)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::geometry::voxelize;
    use crate::tensor::tape_gradient_error;

    fn cloud(n: usize, rng: &mut ChaCha8Rng) -> (Vec<[f64; 3]>, Tensor) {
        let pts: Vec<[f64; 3]> = (0..n).map(|_| [0; 3].map(|_| rng.gen_range(-0.6..0.6))).collect();
        let feats = pts.iter().flat_map(|p| [p[0] * 0.5, p[1] * 0.5, p[2] * 0.5, rng.gen::<f64>()]).collect();
        (pts, Tensor::new(vec![n, 4], feats).unwrap())
    }

    fn input_with(seed: u64, n: usize, factors: &[usize]) -> VoxelInput {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pts, f) = cloud(n, &mut rng);
        VoxelInput::new(&voxelize(&pts, &f, 0.25).unwrap(), 0.5, factors).unwrap()
    }

    fn input(seed: u64, n: usize) -> VoxelInput {
        input_with(seed, n, &[])
    }

    fn config(width: usize, rounds: usize, levels: usize) -> BackboneConfig {
        BackboneConfig { voxel_width: width, rounds, levels: vec![2; levels], ..BackboneConfig::default() }
    }

    #[test]
    fn single_voxel_output_is_the_mlp() {
        let inp = input(0, 1);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = VoxelBackbone::new(&mut store, 7, &config(8, 2, 0), &mut rng);
        let mut tape = Tape::new();
        let bind = store.bind(&mut tape).unwrap();
        let out = net.forward(&mut tape, &bind, &inp).unwrap();
        let x = tape.constant(inp.features.clone()).unwrap();
        let mlp = net.mlp.forward(&mut tape, &bind, x).unwrap();
        assert_eq!(tape.value(out), tape.value(mlp));
        assert_eq!(tape.value(out).shape(), [1, 8]);
    }

    #[test]
    fn voxel_order_is_equivariant() {
        let inp = input_with(2, 60, &[2, 2]);
        let n = inp.len();
        assert!(n > 10);
        let order: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        assert_eq!(order.iter().collect::<std::collections::BTreeSet<_>>().len(), n);
        let mut store = ParamStore::new();
        let net = VoxelBackbone::new(&mut store, 7, &config(6, 2, 2), &mut ChaCha8Rng::seed_from_u64(3));
        let run = |inp: &VoxelInput| {
            let mut tape = Tape::new();
            let bind = store.bind(&mut tape).unwrap();
            let v = net.forward(&mut tape, &bind, inp).unwrap();
            tape.value(v).clone()
        };
        let (a, b) = (run(&inp), run(&inp.permuted(&order)));
        for (i, &o) in order.iter().enumerate() {
            for (x, y) in b.row(i).iter().zip(a.row(o)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn voxel_backbone_gradients_match_finite_differences() {
        let inp = input_with(4, 25, &[2]);
        let mut store = ParamStore::new();
        let net = VoxelBackbone::new(&mut store, 7, &config(5, 2, 1), &mut ChaCha8Rng::seed_from_u64(5));
        let err = tape_gradient_error(store.tensors(), |tape, vars| {
            let bind = Binding::from_vars(vars.to_vec());
            let out = net.forward(tape, &bind, &inp)?;
            tape.mean(out)
        })
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }

    #[test]
    fn coarse_grids_partition_the_finer_one() {
        let inp = input_with(9, 200, &[2, 3]);
        let mut rows = inp.len();
        for grid in &inp.levels {
            assert_eq!(grid.unpool.rows(), rows);
            assert_eq!(grid.pool.source_rows(), rows);
            assert!(grid.pool.rows() < rows);
            // Every finer row has exactly one parent, and the parent pools it.
            for r in 0..rows {
                let parent: Vec<_> = grid.unpool.row(r).collect();
                assert_eq!(parent.len(), 1);
                assert!(grid.pool.row(parent[0].0).any(|(j, _)| j == r));
            }
            for c in 0..grid.pool.rows() {
                let total: f64 = grid.pool.row(c).map(|(_, w)| w).sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
            rows = grid.pool.rows();
        }
        let mut store = ParamStore::new();
        let net = VoxelBackbone::new(&mut store, 7, &config(4, 1, 1), &mut ChaCha8Rng::seed_from_u64(1));
        let mut tape = Tape::new();
        let bind = store.bind(&mut tape).unwrap();
        assert!(net.forward(&mut tape, &bind, &inp).is_err());
    }

    #[test]
    fn image_backbone_shapes_and_zero_input() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = ImageBackbone::new(&mut store, 32, 4, &mut rng).unwrap();
        let mut tape = Tape::new();
        let bind = store.bind(&mut tape).unwrap();
        let x = tape.constant(Tensor::zeros([5, 3, 128, 128])).unwrap();
        let y = net.forward(&mut tape, &bind, x).unwrap();
        assert_eq!(tape.value(y).shape(), [5, 32, 32, 32]);
        assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
        let bad = tape.constant(Tensor::zeros([1, 3, 30, 32])).unwrap();
        assert!(net.forward(&mut tape, &bind, bad).is_err());
    }

    #[test]
    fn shifting_the_image_by_the_stride_shifts_features_by_one_cell() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = ImageBackbone::new(&mut store, 4, 4, &mut rng).unwrap();
        let (h, w) = (16, 24);
        let img = Tensor::randn([1, 3, h, w], 1.0, &mut rng);
        let mut shifted = Tensor::zeros([1, 3, h, w]);
        for c in 0..3 {
            for y in 0..h {
                for x in 4..w {
                    shifted.data_mut()[(c * h + y) * w + x] = img.data()[(c * h + y) * w + x - 4];
                }
            }
        }
        let run = |t: &Tensor| {
            let mut tape = Tape::new();
            let bind = store.bind(&mut tape).unwrap();
            let x = tape.constant(t.clone()).unwrap();
            let y = net.forward(&mut tape, &bind, x).unwrap();
            tape.value(y).clone()
        };
        let (a, b) = (run(&img), run(&shifted));
        let (fh, fw) = (h / 4, w / 4);
        for c in 0..4 {
            for y in 0..fh {
                for x in 1..fw {
                    let (p, q) = (b.data()[(c * fh + y) * fw + x], a.data()[(c * fh + y) * fw + x - 1]);
                    assert!((p - q).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn image_backbone_gradients_match_finite_differences() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = ImageBackbone::new(&mut store, 3, 2, &mut rng).unwrap();
        let img = Tensor::randn([2, 3, 4, 4], 1.0, &mut rng);
        let err = tape_gradient_error(store.tensors(), |tape, vars| {
            let bind = Binding::from_vars(vars.to_vec());
            let x = tape.constant(img.clone())?;
            let y = net.forward(tape, &bind, x)?;
            let y = tape.gelu(y)?;
            tape.mean(y)
        })
        .unwrap();
        assert!(err < 1e-4, "{err}");
    }
}
