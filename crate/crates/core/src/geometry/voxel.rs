use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::tensor::{SparseRows, Tensor};

/// Default quantization step in meters.
pub const DEFAULT_VOXEL_SIZE: f64 = 0.25;

/// Added to neighbor distances before inversion so exact hits stay finite.
pub const DEVOXEL_EPS: f64 = 1e-8;

/// Non-empty voxels sorted by integer coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVoxelSet {
    pub voxel_size: f64,
    pub coords: Vec<[i64; 3]>,
    /// Mean of member point features, `[N_voxel, C]`.
    pub features: Tensor,
    /// Voxel index of every input point.
    pub point_voxel: Vec<usize>,
    lookup: HashMap<[i64; 3], usize>,
}

pub fn voxel_coord(p: [f64; 3], d: f64) -> [i64; 3] {
    p.map(|x| (x / d).floor() as i64)
}

/// Groups points into cells of edge `d` and averages their features.
pub fn voxelize(points: &[[f64; 3]], features: &Tensor, d: f64) -> Result<SparseVoxelSet> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::InvalidArgument(format!("voxel size must be positive, got {d}")));
    }
    if points.is_empty() {
        return Err(Error::Empty("voxelize needs at least one point"));
    }
    if features.rank() != 2 || features.rows() != points.len() {
        return Err(Error::shape(
            "voxelize",
            format!("{} points but features {:?}", points.len(), features.shape()),
        ));
    }
    let mut cells: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
    for (i, &p) in points.iter().enumerate() {
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: "voxelize" });
        }
        cells.entry(voxel_coord(p, d)).or_default().push(i);
    }
    let mut point_voxel = vec![0; points.len()];
    let mut coords = Vec::with_capacity(cells.len());
    for (v, (c, members)) in cells.into_iter().enumerate() {
        for i in members {
            point_voxel[i] = v;
        }
        coords.push(c);
    }
    let features = SparseRows::group_mean(&point_voxel, coords.len())?.apply(features)?;
    Ok(SparseVoxelSet::from_parts(d, coords, features, point_voxel))
}

impl SparseVoxelSet {
    pub fn from_parts(voxel_size: f64, coords: Vec<[i64; 3]>, features: Tensor, point_voxel: Vec<usize>) -> Self {
        let lookup = coords.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        Self {
            voxel_size,
            coords,
            features,
            point_voxel,
            lookup,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn index_of(&self, c: [i64; 3]) -> Option<usize> {
        self.lookup.get(&c).copied()
    }

    pub fn center(&self, v: usize) -> [f64; 3] {
        self.coords[v].map(|c| (c as f64 + 0.5) * self.voxel_size)
    }

    /// Averaging operator from points to voxels, for differentiable pooling.
    pub fn pooling(&self) -> Result<SparseRows> {
        SparseRows::group_mean(&self.point_voxel, self.len())
    }

    /// Per-voxel list of occupied 26-neighbors (self excluded).
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        self.coords
            .iter()
            .map(|c| {
                let mut out = Vec::new();
                for dx in -1..=1 {
                    for dy in -1..=1 {
                        for dz in -1..=1 {
                            if (dx, dy, dz) == (0, 0, 0) {
                                continue;
                            }
                            if let Some(j) = self.index_of([c[0] + dx, c[1] + dy, c[2] + dz]) {
                                out.push(j);
                            }
                        }
                    }
                }
                out
            })
            .collect()
    }

    /// Up to three nearest voxel centers of `q`, ordered by (distance, index).
    pub fn nearest3(&self, q: [f64; 3]) -> Vec<(usize, f64)> {
        let k = 3.min(self.len());
        let d = self.voxel_size;
        let home = voxel_coord(q, d);
        let mut best: Vec<(usize, f64)> = Vec::with_capacity(4);
        let consider = |v: usize, best: &mut Vec<(usize, f64)>| {
            let dist = dist(q, self.center(v));
            let pos = best.partition_point(|&(i, e)| (e, i) < (dist, v));
            if pos < k {
                best.insert(pos, (v, dist));
                best.truncate(k);
            }
        };
        let mut r: i64 = 0;
        loop {
            let side = 2 * r + 1;
            if (side * side * side) as usize > 8 * self.len() {
                // The ring scan would touch more cells than there are voxels.
                best.clear();
                for v in 0..self.len() {
                    consider(v, &mut best);
                }
                return best;
            }
            for_each_ring_cell(home, r, |c| {
                if let Some(v) = self.index_of(c) {
                    consider(v, &mut best);
                }
            });
            // Anything outside rings 0..=r is at least (r + 0.5) * d away.
            if best.len() == k && best[k - 1].1 < (r as f64 + 0.5) * d {
                return best;
            }
            r += 1;
        }
    }

    /// Inverse-distance 3-NN interpolation operator from voxels to `queries`.
    pub fn devoxel_weights(&self, queries: &[[f64; 3]]) -> Result<SparseRows> {
        if self.is_empty() {
            return Err(Error::Empty("devoxelize needs at least one voxel"));
        }
        let mut s = SparseRows::new(self.len());
        for &q in queries {
            let nn = self.nearest3(q);
            let w: Vec<f64> = nn.iter().map(|&(_, dist)| 1.0 / (dist + DEVOXEL_EPS)).collect();
            let total: f64 = w.iter().sum();
            s.push_row(nn.iter().zip(&w).map(|(&(v, _), &w)| (v, w / total)));
        }
        Ok(s)
    }
}

/// Interpolates voxel features `[N_voxel, C]` at query points.
pub fn devoxelize(voxels: &SparseVoxelSet, features: &Tensor, queries: &[[f64; 3]]) -> Result<Tensor> {
    voxels.devoxel_weights(queries)?.apply(features)
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn for_each_ring_cell(home: [i64; 3], r: i64, mut f: impl FnMut([i64; 3])) {
    for dx in -r..=r {
        for dy in -r..=r {
            let edge = dx.abs() == r || dy.abs() == r;
            if edge {
                for dz in -r..=r {
                    f([home[0] + dx, home[1] + dy, home[2] + dz]);
                }
            } else {
                f([home[0] + dx, home[1] + dy, home[2] - r]);
                if r > 0 {
                    f([home[0] + dx, home[1] + dy, home[2] + r]);
                }
            }
        }
    }
}
