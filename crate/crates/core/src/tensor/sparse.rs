use crate::error::{Error, Result};

use super::Tensor;

/// Constant sparse row-mixing matrix in CSR form.
///
/// Row `r` of the product with a dense `[source_rows, C]` tensor is
/// `sum_k weight[k] * x[index[k]]` over the entries of row `r`. Gathers,
/// group means, inverse-distance blends and bilinear taps are all instances.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseRows {
    offsets: Vec<usize>,
    indices: Vec<usize>,
    weights: Vec<f64>,
    source_rows: usize,
}

impl SparseRows {
    pub fn new(source_rows: usize) -> Self {
        Self {
            offsets: vec![0],
            indices: Vec::new(),
            weights: Vec::new(),
            source_rows,
        }
    }

    /// Appends one output row. Panics if an index is out of range.
    pub fn push_row(&mut self, entries: impl IntoIterator<Item = (usize, f64)>) {
        for (i, w) in entries {
            assert!(i < self.source_rows, "sparse index {i} out of range");
            self.indices.push(i);
            self.weights.push(w);
        }
        self.offsets.push(self.indices.len());
    }

    /// Row `r` picks source row `index[r]` with weight 1.
    pub fn gather(index: &[usize], source_rows: usize) -> Self {
        let mut s = Self::new(source_rows);
        for &i in index {
            s.push_row([(i, 1.0)]);
        }
        s
    }

    /// Row `g` is the mean of all source rows with `group[i] == g`.
    pub fn group_mean(group: &[usize], num_groups: usize) -> Result<Self> {
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_groups];
        for (i, &g) in group.iter().enumerate() {
            if g >= num_groups {
                return Err(Error::InvalidArgument(format!(
                    "group id {g} outside [0, {num_groups})"
                )));
            }
            members[g].push(i);
        }
        let mut s = Self::new(group.len());
        for (g, m) in members.iter().enumerate() {
            if m.is_empty() {
                return Err(Error::InvalidArgument(format!("group {g} has no members")));
            }
            let w = 1.0 / m.len() as f64;
            s.push_row(m.iter().map(|&i| (i, w)));
        }
        Ok(s)
    }

    pub fn rows(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn source_rows(&self) -> usize {
        self.source_rows
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.offsets[r], self.offsets[r + 1]);
        self.indices[a..b]
            .iter()
            .copied()
            .zip(self.weights[a..b].iter().copied())
    }

    /// Keeps only the listed output rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut s = Self::new(self.source_rows);
        for &r in rows {
            s.push_row(self.row(r).collect::<Vec<_>>());
        }
        s
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 2 || x.rows() != self.source_rows {
            return Err(Error::shape(
                "sparse_mix",
                format!("expected [{}, C], got {:?}", self.source_rows, x.shape()),
            ));
        }
        let c = x.cols();
        let mut out = vec![0.0; self.rows() * c];
        for r in 0..self.rows() {
            let dst = &mut out[r * c..(r + 1) * c];
            for (i, w) in self.row(r) {
                for (d, s) in dst.iter_mut().zip(x.row(i)) {
                    *d += w * s;
                }
            }
        }
        Tensor::new(vec![self.rows(), c], out)
    }

    /// Accumulates `self^T * grad` into `dx` (`[source_rows, C]`).
    pub(crate) fn apply_transpose_into(&self, grad: &[f64], c: usize, dx: &mut [f64]) {
        for r in 0..self.rows() {
            let g = &grad[r * c..(r + 1) * c];
            for (i, w) in self.row(r) {
                for (d, gv) in dx[i * c..(i + 1) * c].iter_mut().zip(g) {
                    *d += w * gv;
                }
            }
        }
    }
}
