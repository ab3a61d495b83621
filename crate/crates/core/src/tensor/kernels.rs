//! Dense numeric kernels shared by the value-level API and the tape.

use crate::error::{Error, Result};

use super::Tensor;

/// Row-major strided view used by [`gemm`].
#[derive(Clone, Copy)]
pub(crate) struct Mat<'a> {
    pub data: &'a [f64],
    pub row_stride: usize,
    pub col_stride: usize,
}

impl<'a> Mat<'a> {
    pub fn rm(data: &'a [f64], cols: usize) -> Self {
        Self {
            data,
            row_stride: cols,
            col_stride: 1,
        }
    }

    /// Transposed view of a row-major matrix with `cols` columns.
    pub fn tr(data: &'a [f64], cols: usize) -> Self {
        Self {
            data,
            row_stride: 1,
            col_stride: cols,
        }
    }
}

/// `c (m x n, row-major) (+)= a (m x k) * b (k x n)`.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: Mat<'_>, b: Mat<'_>, c: &mut [f64], accumulate: bool) {
    debug_assert!(c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c[..m * n].fill(0.0);
        }
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: strides describe in-bounds views of the slices; the caller sizes
    // `a`, `b` and `c` for the given dimensions and the output does not alias inputs.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr(),
            b.row_stride as isize,
            b.col_stride as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows() {
        return Err(Error::shape(
            "matmul",
            format!("{:?} x {:?}", a.shape(), b.shape()),
        ));
    }
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut out = vec![0.0; m * n];
    gemm(m, k, n, Mat::rm(a.data(), k), Mat::rm(b.data(), n), &mut out, false);
    Tensor::new(vec![m, n], out)
}

/// `(outer, len, inner)` decomposition of `shape` around `axis`.
pub(crate) fn axis_layout(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Softmax along `axis`, stabilized by subtracting the slice maximum.
pub fn softmax_axis(t: &Tensor, axis: usize) -> Result<Tensor> {
    if axis >= t.rank() {
        return Err(Error::shape(
            "softmax_axis",
            format!("axis {axis} for shape {:?}", t.shape()),
        ));
    }
    t.ensure_finite("softmax_axis")?;
    let (outer, len, inner) = axis_layout(t.shape(), axis);
    let x = t.data();
    let mut out = vec![0.0; x.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |l: usize| o * len * inner + l * inner + i;
            let max = (0..len).map(|l| x[at(l)]).fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for l in 0..len {
                let e = (x[at(l)] - max).exp();
                out[at(l)] = e;
                sum += e;
            }
            for l in 0..len {
                out[at(l)] /= sum;
            }
        }
    }
    Tensor::new(t.shape().to_vec(), out)
}

pub(crate) fn softmax_axis_backward(y: &Tensor, dy: &[f64], axis: usize, dx: &mut [f64]) {
    let (outer, len, inner) = axis_layout(y.shape(), axis);
    let y = y.data();
    for o in 0..outer {
        for i in 0..inner {
            let at = |l: usize| o * len * inner + l * inner + i;
            let dot: f64 = (0..len).map(|l| y[at(l)] * dy[at(l)]).sum();
            for l in 0..len {
                dx[at(l)] += y[at(l)] * (dy[at(l)] - dot);
            }
        }
    }
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Normalized rows and per-row inverse standard deviations.
pub(crate) struct LayerNormStats {
    pub normalized: Vec<f64>,
    pub inv_std: Vec<f64>,
}

pub(crate) fn layer_norm_stats(t: &Tensor) -> Result<LayerNormStats> {
    let c = t.cols();
    if t.rank() == 0 || c < 1 {
        return Err(Error::shape("layer_norm", "last axis must be non-empty"));
    }
    let rows = t.len() / c;
    let mut normalized = vec![0.0; t.len()];
    let mut inv_std = vec![0.0; rows];
    for r in 0..rows {
        let x = &t.data()[r * c..(r + 1) * c];
        let mean = x.iter().sum::<f64>() / c as f64;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
        let inv = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        inv_std[r] = inv;
        for (o, v) in normalized[r * c..(r + 1) * c].iter_mut().zip(x) {
            *o = (v - mean) * inv;
        }
    }
    Ok(LayerNormStats {
        normalized,
        inv_std,
    })
}

fn check_affine(t: &Tensor, gain: &Tensor, bias: &Tensor) -> Result<()> {
    let c = t.cols();
    if gain.len() != c || bias.len() != c {
        return Err(Error::shape(
            "layer_norm",
            format!(
                "gain {:?} / bias {:?} vs last axis {c}",
                gain.shape(),
                bias.shape()
            ),
        ));
    }
    Ok(())
}

/// Layer normalization over the last axis followed by a per-channel affine map.
pub fn layer_norm(t: &Tensor, gain: &Tensor, bias: &Tensor) -> Result<Tensor> {
    t.ensure_finite("layer_norm")?;
    let stats = layer_norm_stats(t)?;
    check_affine(t, gain, bias)?;
    let c = t.cols();
    let mut out = stats.normalized;
    for row in out.chunks_mut(c) {
        for ((o, g), b) in row.iter_mut().zip(gain.data()).zip(bias.data()) {
            *o = *o * g + b;
        }
    }
    Tensor::new(t.shape().to_vec(), out)
}

pub(crate) fn layer_norm_check(t: &Tensor, gain: &Tensor, bias: &Tensor) -> Result<()> {
    check_affine(t, gain, bias)
}

/// Bilinear taps `(row, col, weight)` at `(u, v)` on an `h x w` grid, where
/// integer coordinates are pixel centers and `u` runs along the width.
pub fn bilinear_taps(h: usize, w: usize, u: f64, v: f64) -> Result<[(usize, usize, f64); 4]> {
    let max_u = w.saturating_sub(1) as f64;
    let max_v = h.saturating_sub(1) as f64;
    if h == 0 || w == 0 || !(0.0..=max_u).contains(&u) || !(0.0..=max_v).contains(&v) {
        return Err(Error::InvalidArgument(format!(
            "sample ({u}, {v}) outside [0, {max_u}] x [0, {max_v}]"
        )));
    }
    let u0 = (u.floor() as usize).min(w.saturating_sub(2));
    let v0 = (v.floor() as usize).min(h.saturating_sub(2));
    let u1 = (u0 + 1).min(w - 1);
    let v1 = (v0 + 1).min(h - 1);
    let fu = if u1 == u0 { 0.0 } else { u - u0 as f64 };
    let fv = if v1 == v0 { 0.0 } else { v - v0 as f64 };
    Ok([
        (v0, u0, (1.0 - fu) * (1.0 - fv)),
        (v0, u1, fu * (1.0 - fv)),
        (v1, u0, (1.0 - fu) * fv),
        (v1, u1, fu * fv),
    ])
}

/// Channel-wise bilinear sample of a `[C, H, W]` map.
pub fn bilinear_sample(map: &Tensor, u: f64, v: f64) -> Result<Tensor> {
    let [c, h, w] = map.shape() else {
        return Err(Error::shape("bilinear_sample", format!("{:?}", map.shape())));
    };
    let (c, h, w) = (*c, *h, *w);
    let taps = bilinear_taps(h, w, u, v)?;
    let out = (0..c)
        .map(|ch| {
            taps.iter()
                .map(|&(r, col, wt)| wt * map.data()[ch * h * w + r * w + col])
                .sum()
        })
        .collect();
    Tensor::new(vec![c], out)
}

/// Per-group arithmetic mean of the rows of `values`.
pub fn scatter_mean(values: &Tensor, group_ids: &[usize], num_groups: usize) -> Result<Tensor> {
    if values.rank() != 2 || values.rows() != group_ids.len() {
        return Err(Error::shape(
            "scatter_mean",
            format!("{:?} rows vs {} ids", values.shape(), group_ids.len()),
        ));
    }
    super::SparseRows::group_mean(group_ids, num_groups)?.apply(values)
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub c_in: usize,
    pub h: usize,
    pub w: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub h_out: usize,
    pub w_out: usize,
}

impl ConvGeom {
    pub fn new(x: &[usize], wt: &[usize], stride: usize, pad: usize) -> Result<Self> {
        let (&[n, c_in, h, w], &[c_out, c_in_w, k, k2]) = (x, wt) else {
            return Err(Error::shape("conv2d", format!("{x:?} * {wt:?}")));
        };
        if c_in != c_in_w || k != k2 || stride == 0 || h + 2 * pad < k || w + 2 * pad < k {
            return Err(Error::shape("conv2d", format!("{x:?} * {wt:?}")));
        }
        Ok(Self {
            n,
            c_in,
            h,
            w,
            c_out,
            k,
            stride,
            pad,
            h_out: (h + 2 * pad - k) / stride + 1,
            w_out: (w + 2 * pad - k) / stride + 1,
        })
    }

    fn patch(&self) -> usize {
        self.c_in * self.k * self.k
    }

    fn pixels(&self) -> usize {
        self.h_out * self.w_out
    }

    /// Source pixel for output position `(oy, ox)` and kernel tap `(ky, kx)`.
    fn source(&self, oy: usize, ox: usize, ky: usize, kx: usize) -> Option<(usize, usize)> {
        let y = (oy * self.stride + ky).checked_sub(self.pad)?;
        let x = (ox * self.stride + kx).checked_sub(self.pad)?;
        (y < self.h && x < self.w).then_some((y, x))
    }

    fn im2col(&self, img: &[f64], cols: &mut [f64]) {
        let p = self.pixels();
        for c in 0..self.c_in {
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let row = (c * self.k + ky) * self.k + kx;
                    for oy in 0..self.h_out {
                        for ox in 0..self.w_out {
                            cols[row * p + oy * self.w_out + ox] = match self.source(oy, ox, ky, kx) {
                                Some((y, x)) => img[(c * self.h + y) * self.w + x],
                                None => 0.0,
                            };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, cols: &[f64], img: &mut [f64]) {
        let p = self.pixels();
        for c in 0..self.c_in {
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let row = (c * self.k + ky) * self.k + kx;
                    for oy in 0..self.h_out {
                        for ox in 0..self.w_out {
                            if let Some((y, x)) = self.source(oy, ox, ky, kx) {
                                img[(c * self.h + y) * self.w + x] += cols[row * p + oy * self.w_out + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn conv2d_forward(g: &ConvGeom, x: &[f64], w: &[f64], b: Option<&[f64]>) -> Vec<f64> {
    let (patch, p) = (g.patch(), g.pixels());
    let mut out = vec![0.0; g.n * g.c_out * p];
    let mut cols = vec![0.0; patch * p];
    let img_len = g.c_in * g.h * g.w;
    for n in 0..g.n {
        g.im2col(&x[n * img_len..(n + 1) * img_len], &mut cols);
        let dst = &mut out[n * g.c_out * p..(n + 1) * g.c_out * p];
        gemm(g.c_out, patch, p, Mat::rm(w, patch), Mat::rm(&cols, p), dst, false);
        if let Some(b) = b {
            for (co, bias) in b.iter().enumerate() {
                dst[co * p..(co + 1) * p].iter_mut().for_each(|v| *v += bias);
            }
        }
    }
    out
}

/// Accumulates input, weight and bias gradients of a convolution.
pub(crate) fn conv2d_backward(
    g: &ConvGeom,
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    dx: Option<&mut [f64]>,
    dw: Option<&mut [f64]>,
    db: Option<&mut [f64]>,
) {
    let (patch, p) = (g.patch(), g.pixels());
    let img_len = g.c_in * g.h * g.w;
    let mut cols = vec![0.0; patch * p];
    let mut dcols = vec![0.0; patch * p];
    let (mut dx, mut dw) = (dx, dw);
    for n in 0..g.n {
        let dyn_ = &dy[n * g.c_out * p..(n + 1) * g.c_out * p];
        if let Some(dw) = dw.as_deref_mut() {
            g.im2col(&x[n * img_len..(n + 1) * img_len], &mut cols);
            gemm(g.c_out, p, patch, Mat::rm(dyn_, p), Mat::tr(&cols, p), dw, true);
        }
        if let Some(dx) = dx.as_deref_mut() {
            gemm(patch, g.c_out, p, Mat::tr(w, patch), Mat::rm(dyn_, p), &mut dcols, false);
            g.col2im(&dcols, &mut dx[n * img_len..(n + 1) * img_len]);
        }
    }
    if let Some(db) = db {
        for n in 0..g.n {
            for (co, d) in db.iter_mut().enumerate() {
                let base = (n * g.c_out + co) * p;
                *d += dy[base..base + p].iter().sum::<f64>();
            }
        }
    }
}
