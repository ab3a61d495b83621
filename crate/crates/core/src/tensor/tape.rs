//! Reverse-mode differentiation over a linear record of executed operations.
//!
//! Every operation appends a node holding its value and whatever it needs for
//! the reverse pass. Node indices are a topological order by construction, so
//! the reverse pass is a single backwards sweep. [`Tape::backward`] consumes
//! the tape.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

use super::kernels::{self, ConvGeom, Mat};
use super::{SparseRows, Tensor};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    index: usize,
}

enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddBias(usize, usize),
    Scale(usize, f64),
    ScaleRows(usize, Vec<f64>),
    Gelu(usize),
    Softmax(usize, usize),
    LayerNorm {
        x: usize,
        gain: usize,
        bias: usize,
        normalized: Vec<f64>,
        inv_std: Vec<f64>,
    },
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    SliceCols {
        x: usize,
        start: usize,
    },
    Transpose(usize),
    Permute {
        x: usize,
        source_of: Vec<usize>,
    },
    Reshape(usize),
    SparseMix(usize, SparseRows),
    Conv2d {
        x: usize,
        w: usize,
        b: Option<usize>,
        geom: ConvGeom,
    },
    Sum(usize),
    RowSelect {
        a: usize,
        b: usize,
        take_a: Vec<bool>,
    },
    /// Scalar whose gradient w.r.t. each input was computed in the forward pass.
    Linearized(Vec<(usize, Vec<f64>)>),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

pub struct Tape {
    id: u64,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape == self.id && v.index < self.nodes.len() {
            Ok(v.index)
        } else {
            Err(Error::ForeignTensor)
        }
    }

    fn node(&self, v: Var) -> Result<&Node> {
        Ok(&self.nodes[self.idx(v)?])
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.node(v).expect("variable from another tape").value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.node(v).map(|n| n.requires_grad).unwrap_or(false)
    }

    fn push(&mut self, value: Tensor, op: Op, parents: &[usize], name: &'static str) -> Result<Var> {
        value.ensure_finite(name)?;
        let requires_grad = parents.iter().any(|&p| self.nodes[p].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        })
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Result<Var> {
        value.ensure_finite("leaf")?;
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Ok(Var {
            tape: self.id,
            index: self.nodes.len() - 1,
        })
    }

    pub fn param(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, false)
    }

    /// Copy of `x` that the reverse pass treats as a constant.
    pub fn detach(&mut self, x: Var) -> Result<Var> {
        let v = self.node(x)?.value.clone();
        self.constant(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let out = kernels::matmul(&self.nodes[ia].value, &self.nodes[ib].value)?;
        self.push(out, Op::MatMul(ia, ib), &[ia, ib], "matmul")
    }

    fn same_shape(&self, ia: usize, ib: usize, op: &'static str) -> Result<()> {
        let (sa, sb) = (self.nodes[ia].value.shape(), self.nodes[ib].value.shape());
        if sa == sb {
            Ok(())
        } else {
            Err(Error::shape(op, format!("{sa:?} vs {sb:?}")))
        }
    }

    fn zip(&mut self, a: Var, b: Var, name: &'static str, f: fn(f64, f64) -> f64) -> Result<(Tensor, usize, usize)> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        self.same_shape(ia, ib, name)?;
        let (va, vb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| f(*x, *y)).collect();
        Ok((Tensor::new(va.shape().to_vec(), data)?, ia, ib))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (out, ia, ib) = self.zip(a, b, "add", |x, y| x + y)?;
        self.push(out, Op::Add(ia, ib), &[ia, ib], "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (out, ia, ib) = self.zip(a, b, "sub", |x, y| x - y)?;
        self.push(out, Op::Sub(ia, ib), &[ia, ib], "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (out, ia, ib) = self.zip(a, b, "mul", |x, y| x * y)?;
        self.push(out, Op::Mul(ia, ib), &[ia, ib], "mul")
    }

    /// Adds a `[C]` vector to every length-`C` row of `x`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (ix, ib) = (self.idx(x)?, self.idx(bias)?);
        let (vx, vb) = (&self.nodes[ix].value, &self.nodes[ib].value);
        let c = vx.cols();
        if vb.len() != c {
            return Err(Error::shape("add_bias", format!("{:?} + {:?}", vx.shape(), vb.shape())));
        }
        let mut out = vx.clone();
        for row in out.data_mut().chunks_mut(c) {
            row.iter_mut().zip(vb.data()).for_each(|(o, b)| *o += b);
        }
        self.push(out, Op::AddBias(ix, ib), &[ix, ib], "add_bias")
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Result<Var> {
        let ix = self.idx(x)?;
        let out = self.nodes[ix].value.map(|v| v * s);
        self.push(out, Op::Scale(ix, s), &[ix], "scale")
    }

    /// Multiplies row `i` of a matrix by the constant `s[i]`.
    pub fn scale_rows(&mut self, x: Var, s: Vec<f64>) -> Result<Var> {
        let ix = self.idx(x)?;
        let v = &self.nodes[ix].value;
        if v.rank() != 2 || v.rows() != s.len() {
            return Err(Error::shape("scale_rows", format!("{:?} by {}", v.shape(), s.len())));
        }
        let mut out = v.clone();
        for (i, si) in s.iter().enumerate() {
            out.row_mut(i).iter_mut().for_each(|o| *o *= si);
        }
        self.push(out, Op::ScaleRows(ix, s), &[ix], "scale_rows")
    }

    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let ix = self.idx(x)?;
        let out = self.nodes[ix].value.map(kernels::gelu);
        self.push(out, Op::Gelu(ix), &[ix], "gelu")
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let ix = self.idx(x)?;
        let out = kernels::softmax_axis(&self.nodes[ix].value, axis)?;
        self.push(out, Op::Softmax(ix, axis), &[ix], "softmax")
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (ix, ig, ib) = (self.idx(x)?, self.idx(gain)?, self.idx(bias)?);
        let (vx, vg, vb) = (&self.nodes[ix].value, &self.nodes[ig].value, &self.nodes[ib].value);
        kernels::layer_norm_check(vx, vg, vb)?;
        let stats = kernels::layer_norm_stats(vx)?;
        let c = vx.cols();
        let mut out = stats.normalized.clone();
        for row in out.chunks_mut(c) {
            for ((o, g), b) in row.iter_mut().zip(vg.data()).zip(vb.data()) {
                *o = *o * g + b;
            }
        }
        let out = Tensor::new(vx.shape().to_vec(), out)?;
        let op = Op::LayerNorm {
            x: ix,
            gain: ig,
            bias: ib,
            normalized: stats.normalized,
            inv_std: stats.inv_std,
        };
        self.push(out, op, &[ix, ig, ib], "layer_norm")
    }

    fn matrix_dims(&self, i: usize, op: &'static str) -> Result<(usize, usize)> {
        let v = &self.nodes[i].value;
        if v.rank() != 2 {
            return Err(Error::shape(op, format!("expected a matrix, got {:?}", v.shape())));
        }
        Ok((v.rows(), v.cols()))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let ids = parts.iter().map(|&p| self.idx(p)).collect::<Result<Vec<_>>>()?;
        let dims = ids.iter().map(|&i| self.matrix_dims(i, "concat_cols")).collect::<Result<Vec<_>>>()?;
        let rows = dims.first().map_or(0, |d| d.0);
        if dims.iter().any(|d| d.0 != rows) {
            return Err(Error::shape("concat_cols", format!("{dims:?}")));
        }
        let total: usize = dims.iter().map(|d| d.1).sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &i in &ids {
                out.extend_from_slice(self.nodes[i].value.row(r));
            }
        }
        let out = Tensor::new(vec![rows, total], out)?;
        self.push(out, Op::ConcatCols(ids.clone()), &ids, "concat_cols")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let ids = parts.iter().map(|&p| self.idx(p)).collect::<Result<Vec<_>>>()?;
        let dims = ids.iter().map(|&i| self.matrix_dims(i, "concat_rows")).collect::<Result<Vec<_>>>()?;
        let cols = dims.first().map_or(0, |d| d.1);
        if dims.iter().any(|d| d.1 != cols) {
            return Err(Error::shape("concat_rows", format!("{dims:?}")));
        }
        let rows: usize = dims.iter().map(|d| d.0).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for &i in &ids {
            out.extend_from_slice(self.nodes[i].value.data());
        }
        let out = Tensor::new(vec![rows, cols], out)?;
        self.push(out, Op::ConcatRows(ids.clone()), &ids, "concat_rows")
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let ix = self.idx(x)?;
        let (rows, cols) = self.matrix_dims(ix, "slice_cols")?;
        if start + len > cols {
            return Err(Error::shape("slice_cols", format!("[{start}, {}) of {cols}", start + len)));
        }
        let v = &self.nodes[ix].value;
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&v.row(r)[start..start + len]);
        }
        let out = Tensor::new(vec![rows, len], out)?;
        self.push(out, Op::SliceCols { x: ix, start }, &[ix], "slice_cols")
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let ix = self.idx(x)?;
        let (rows, cols) = self.matrix_dims(ix, "transpose")?;
        let v = self.nodes[ix].value.data();
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                out[c * rows + r] = v[r * cols + c];
            }
        }
        let out = Tensor::new(vec![cols, rows], out)?;
        self.push(out, Op::Transpose(ix), &[ix], "transpose")
    }

    /// General axis permutation: output axis `k` is input axis `axes[k]`.
    pub fn permute(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        let ix = self.idx(x)?;
        let v = &self.nodes[ix].value;
        let shape = v.shape();
        let mut seen = vec![false; shape.len()];
        if axes.len() != shape.len() || axes.iter().any(|&a| a >= shape.len() || std::mem::replace(&mut seen[a], true)) {
            return Err(Error::shape("permute", format!("axes {axes:?} for {shape:?}")));
        }
        let mut in_strides = vec![1; shape.len()];
        for k in (0..shape.len().saturating_sub(1)).rev() {
            in_strides[k] = in_strides[k + 1] * shape[k + 1];
        }
        let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
        let n = v.len();
        let mut source_of = Vec::with_capacity(n);
        let mut counter = vec![0usize; out_shape.len()];
        for _ in 0..n {
            source_of.push(counter.iter().zip(axes).map(|(&c, &a)| c * in_strides[a]).sum());
            for k in (0..counter.len()).rev() {
                counter[k] += 1;
                if counter[k] < out_shape[k] {
                    break;
                }
                counter[k] = 0;
            }
        }
        let data = source_of.iter().map(|&s| v.data()[s]).collect();
        let out = Tensor::new(out_shape, data)?;
        self.push(out, Op::Permute { x: ix, source_of }, &[ix], "permute")
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let ix = self.idx(x)?;
        let out = self.nodes[ix].value.clone().reshape(shape.to_vec())?;
        self.push(out, Op::Reshape(ix), &[ix], "reshape")
    }

    /// Applies a constant sparse row-mixing matrix: `out = s * x`.
    pub fn sparse_mix(&mut self, x: Var, s: SparseRows) -> Result<Var> {
        let ix = self.idx(x)?;
        let out = s.apply(&self.nodes[ix].value)?;
        self.push(out, Op::SparseMix(ix, s), &[ix], "sparse_mix")
    }

    /// 2-D convolution of `[N, C_in, H, W]` with `[C_out, C_in, k, k]` weights.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize, pad: usize) -> Result<Var> {
        let (ix, iw) = (self.idx(x)?, self.idx(w)?);
        let ib = b.map(|b| self.idx(b)).transpose()?;
        let geom = ConvGeom::new(self.nodes[ix].value.shape(), self.nodes[iw].value.shape(), stride, pad)?;
        if let Some(ib) = ib {
            if self.nodes[ib].value.len() != geom.c_out {
                return Err(Error::shape("conv2d", "bias length differs from output channels"));
            }
        }
        let out = kernels::conv2d_forward(
            &geom,
            self.nodes[ix].value.data(),
            self.nodes[iw].value.data(),
            ib.map(|i| self.nodes[i].value.data()),
        );
        let out = Tensor::new(vec![geom.n, geom.c_out, geom.h_out, geom.w_out], out)?;
        let mut parents = vec![ix, iw];
        parents.extend(ib);
        self.push(out, Op::Conv2d { x: ix, w: iw, b: ib, geom }, &parents, "conv2d")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let ix = self.idx(x)?;
        let s = self.nodes[ix].value.data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(ix), &[ix], "sum")
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.node(x)?.value.len();
        if n == 0 {
            return Err(Error::Empty("mean of an empty tensor"));
        }
        let s = self.sum(x)?;
        self.scale(s, 1.0 / n as f64)
    }

    /// Row `i` comes from `a` where `take_a[i]`, otherwise from `b`.
    pub fn row_select(&mut self, a: Var, b: Var, take_a: Vec<bool>) -> Result<Var> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        self.same_shape(ia, ib, "row_select")?;
        let (va, vb) = (&self.nodes[ia].value, &self.nodes[ib].value);
        if va.rank() != 2 || va.rows() != take_a.len() {
            return Err(Error::shape("row_select", format!("{:?} with {} mask bits", va.shape(), take_a.len())));
        }
        let mut out = vb.clone();
        for (i, &t) in take_a.iter().enumerate() {
            if t {
                out.row_mut(i).copy_from_slice(va.row(i));
            }
        }
        self.push(out, Op::RowSelect { a: ia, b: ib, take_a }, &[ia, ib], "row_select")
    }

    /// Records a scalar whose gradient with respect to each input is already
    /// known (`d value / d input`, same length as the input).
    pub fn linearized_scalar(&mut self, value: f64, inputs: Vec<(Var, Vec<f64>)>) -> Result<Var> {
        let mut parts = Vec::with_capacity(inputs.len());
        for (v, g) in inputs {
            let i = self.idx(v)?;
            if g.len() != self.nodes[i].value.len() {
                return Err(Error::shape("linearized_scalar", "gradient length differs from input"));
            }
            parts.push((i, g));
        }
        let parents: Vec<usize> = parts.iter().map(|p| p.0).collect();
        self.push(Tensor::scalar(value), Op::Linearized(parts), &parents, "linearized_scalar")
    }

    /// Runs the reverse pass from a scalar `loss`, consuming the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients> {
        let il = self.idx(loss)?;
        let shape = self.nodes[il].value.shape().to_vec();
        if self.nodes[il].value.len() != 1 {
            return Err(Error::NonScalarLoss(shape));
        }
        let mut nodes = self.nodes;
        nodes.truncate(il + 1);
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; nodes.len()];
        grads[il] = Some(vec![1.0]);
        let mut leaf_grads: Vec<Option<Tensor>> = vec![None; nodes.len()];

        while let Some(node) = nodes.pop() {
            let i = nodes.len();
            let Some(g) = grads[i].take() else { continue };
            if !node.requires_grad {
                continue;
            }
            let mut acc = Accumulator {
                nodes: &nodes,
                grads: &mut grads,
            };
            match node.op {
                Op::Leaf => {
                    leaf_grads[i] = Some(Tensor::new(node.value.shape().to_vec(), g)?);
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (&nodes[a].value, &nodes[b].value);
                    let (m, k, n) = (va.rows(), va.cols(), vb.cols());
                    if let Some(da) = acc.slot(a) {
                        kernels::gemm(m, n, k, Mat::rm(&g, n), Mat::tr(vb.data(), n), da, true);
                    }
                    if let Some(db) = acc.slot(b) {
                        kernels::gemm(k, m, n, Mat::tr(va.data(), k), Mat::rm(&g, n), db, true);
                    }
                }
                Op::Add(a, b) => {
                    acc.add(a, &g);
                    acc.add(b, &g);
                }
                Op::Sub(a, b) => {
                    acc.add(a, &g);
                    if let Some(db) = acc.slot(b) {
                        db.iter_mut().zip(&g).for_each(|(d, g)| *d -= g);
                    }
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (nodes[a].value.data(), nodes[b].value.data());
                    if let Some(da) = acc.slot(a) {
                        for ((d, g), y) in da.iter_mut().zip(&g).zip(vb) {
                            *d += g * y;
                        }
                    }
                    if let Some(db) = acc.slot(b) {
                        for ((d, g), x) in db.iter_mut().zip(&g).zip(va) {
                            *d += g * x;
                        }
                    }
                }
                Op::AddBias(x, b) => {
                    acc.add(x, &g);
                    let c = nodes[b].value.len();
                    if let Some(db) = acc.slot(b) {
                        for row in g.chunks(c) {
                            db.iter_mut().zip(row).for_each(|(d, g)| *d += g);
                        }
                    }
                }
                Op::Scale(x, s) => {
                    if let Some(dx) = acc.slot(x) {
                        dx.iter_mut().zip(&g).for_each(|(d, g)| *d += s * g);
                    }
                }
                Op::ScaleRows(x, s) => {
                    let c = nodes[x].value.cols();
                    if let Some(dx) = acc.slot(x) {
                        for (i, si) in s.iter().enumerate() {
                            for (d, g) in dx[i * c..(i + 1) * c].iter_mut().zip(&g[i * c..(i + 1) * c]) {
                                *d += si * g;
                            }
                        }
                    }
                }
                Op::Gelu(x) => {
                    let vx = nodes[x].value.data();
                    if let Some(dx) = acc.slot(x) {
                        for ((d, g), v) in dx.iter_mut().zip(&g).zip(vx) {
                            *d += g * kernels::gelu_grad(*v);
                        }
                    }
                }
                Op::Softmax(x, axis) => {
                    if let Some(dx) = acc.slot(x) {
                        kernels::softmax_axis_backward(&node.value, &g, axis, dx);
                    }
                }
                Op::LayerNorm {
                    x,
                    gain,
                    bias,
                    normalized,
                    inv_std,
                } => {
                    let c = nodes[gain].value.len();
                    let gv = nodes[gain].value.data().to_vec();
                    if let Some(dgain) = acc.slot(gain) {
                        for (grow, nrow) in g.chunks(c).zip(normalized.chunks(c)) {
                            for ((d, gi), ni) in dgain.iter_mut().zip(grow).zip(nrow) {
                                *d += gi * ni;
                            }
                        }
                    }
                    if let Some(dbias) = acc.slot(bias) {
                        for grow in g.chunks(c) {
                            dbias.iter_mut().zip(grow).for_each(|(d, gi)| *d += gi);
                        }
                    }
                    if let Some(dx) = acc.slot(x) {
                        let cf = c as f64;
                        for (r, (grow, nrow)) in g.chunks(c).zip(normalized.chunks(c)).enumerate() {
                            let dn: Vec<f64> = grow.iter().zip(&gv).map(|(a, b)| a * b).collect();
                            let sum_dn: f64 = dn.iter().sum();
                            let sum_dn_n: f64 = dn.iter().zip(nrow).map(|(a, b)| a * b).sum();
                            let inv = inv_std[r];
                            for (k, d) in dx[r * c..(r + 1) * c].iter_mut().enumerate() {
                                *d += inv / cf * (cf * dn[k] - sum_dn - nrow[k] * sum_dn_n);
                            }
                        }
                    }
                }
                Op::ConcatCols(ids) => {
                    let rows = node.value.rows();
                    let total = node.value.cols();
                    let mut offset = 0;
                    for &p in &ids {
                        let c = nodes[p].value.cols();
                        if let Some(dp) = acc.slot(p) {
                            for r in 0..rows {
                                for (d, gi) in dp[r * c..(r + 1) * c]
                                    .iter_mut()
                                    .zip(&g[r * total + offset..r * total + offset + c])
                                {
                                    *d += gi;
                                }
                            }
                        }
                        offset += c;
                    }
                }
                Op::ConcatRows(ids) => {
                    let mut offset = 0;
                    for &p in &ids {
                        let n = nodes[p].value.len();
                        acc.add(p, &g[offset..offset + n]);
                        offset += n;
                    }
                }
                Op::SliceCols { x, start } => {
                    let len = node.value.cols();
                    let cols = nodes[x].value.cols();
                    if let Some(dx) = acc.slot(x) {
                        for (r, grow) in g.chunks(len).enumerate() {
                            for (d, gi) in dx[r * cols + start..r * cols + start + len].iter_mut().zip(grow) {
                                *d += gi;
                            }
                        }
                    }
                }
                Op::Transpose(x) => {
                    let (rows, cols) = (nodes[x].value.rows(), nodes[x].value.cols());
                    if let Some(dx) = acc.slot(x) {
                        for r in 0..rows {
                            for c in 0..cols {
                                dx[r * cols + c] += g[c * rows + r];
                            }
                        }
                    }
                }
                Op::Permute { x, source_of } => {
                    if let Some(dx) = acc.slot(x) {
                        for (gi, &s) in g.iter().zip(&source_of) {
                            dx[s] += gi;
                        }
                    }
                }
                Op::Reshape(x) => acc.add(x, &g),
                Op::SparseMix(x, s) => {
                    let c = nodes[x].value.cols();
                    if let Some(dx) = acc.slot(x) {
                        s.apply_transpose_into(&g, c, dx);
                    }
                }
                Op::Conv2d { x, w, b, geom } => {
                    let xv = nodes[x].value.data().to_vec();
                    let wv = nodes[w].value.data().to_vec();
                    let mut dx = acc.wants(x).then(|| vec![0.0; xv.len()]);
                    let mut dw = acc.wants(w).then(|| vec![0.0; wv.len()]);
                    let mut db = b.filter(|&b| acc.wants(b)).map(|_| vec![0.0; geom.c_out]);
                    kernels::conv2d_backward(&geom, &xv, &wv, &g, dx.as_deref_mut(), dw.as_deref_mut(), db.as_deref_mut());
                    if let Some(dx) = dx {
                        acc.add(x, &dx);
                    }
                    if let Some(dw) = dw {
                        acc.add(w, &dw);
                    }
                    if let (Some(b), Some(db)) = (b, db) {
                        acc.add(b, &db);
                    }
                }
                Op::Sum(x) => {
                    if let Some(dx) = acc.slot(x) {
                        dx.iter_mut().for_each(|d| *d += g[0]);
                    }
                }
                Op::RowSelect { a, b, take_a } => {
                    let c = node.value.cols();
                    for (p, want) in [(a, true), (b, false)] {
                        if let Some(dp) = acc.slot(p) {
                            for (i, &t) in take_a.iter().enumerate() {
                                if t == want {
                                    for (d, gi) in dp[i * c..(i + 1) * c].iter_mut().zip(&g[i * c..(i + 1) * c]) {
                                        *d += gi;
                                    }
                                }
                            }
                        }
                    }
                }
                Op::Linearized(parts) => {
                    for (p, jac) in parts {
                        if let Some(dp) = acc.slot(p) {
                            dp.iter_mut().zip(&jac).for_each(|(d, j)| *d += g[0] * j);
                        }
                    }
                }
            }
        }
        for (i, t) in leaf_grads.iter().enumerate() {
            if let Some(t) = t {
                if !t.is_finite() {
                    return Err(Error::Numerical(format!("non-finite gradient for leaf {i}")));
                }
            }
        }
        Ok(Gradients {
            tape: self.id,
            grads: leaf_grads,
        })
    }
}

struct Accumulator<'a> {
    nodes: &'a [Node],
    grads: &'a mut [Option<Vec<f64>>],
}

impl Accumulator<'_> {
    fn wants(&self, i: usize) -> bool {
        self.nodes[i].requires_grad
    }

    fn slot(&mut self, i: usize) -> Option<&mut [f64]> {
        if !self.nodes[i].requires_grad {
            return None;
        }
        let n = self.nodes[i].value.len();
        Some(self.grads[i].get_or_insert_with(|| vec![0.0; n]).as_mut_slice())
    }

    fn add(&mut self, i: usize, g: &[f64]) {
        if let Some(d) = self.slot(i) {
            d.iter_mut().zip(g).for_each(|(d, g)| *d += g);
        }
    }
}

/// Gradients of the leaves that required them, keyed by their [`Var`].
pub struct Gradients {
    tape: u64,
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of a leaf; `None` for constants and leaves the loss does not reach.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.index).and_then(Option::as_ref)
    }

    pub fn try_get(&self, v: Var) -> Result<Option<&Tensor>> {
        if v.tape != self.tape {
            return Err(Error::ForeignTensor);
        }
        Ok(self.get(v))
    }
}
