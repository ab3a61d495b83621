use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::IGNORE;
use crate::tensor::{Tape, Tensor, Var};

fn check_rows(t: &Tensor, labels: &[usize], op: &'static str) -> Result<()> {
    if t.rank() != 2 || t.rows() != labels.len() {
        return Err(Error::shape(op, format!("{:?} against {} labels", t.shape(), labels.len())));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= t.cols()) {
        return Err(Error::InvalidArgument(format!("{op}: label {l} outside {} classes", t.cols())));
    }
    Ok(())
}

/// Mean negative log-softmax over rows whose label is not `ignore`, and its
/// gradient with respect to the logits. Zero when every row is ignored.
pub fn cross_entropy_value(logits: &Tensor, labels: &[usize], ignore: usize) -> Result<(f64, Vec<f64>)> {
    check_rows(logits, labels, "cross_entropy")?;
    let c = logits.cols();
    let kept = labels.iter().filter(|&&l| l != ignore).count();
    let mut grad = vec![0.0; logits.len()];
    if kept == 0 {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / kept as f64;
    let mut total = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        if l == ignore {
            continue;
        }
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        total += log_z - row[l];
        let g = &mut grad[i * c..(i + 1) * c];
        for (k, gk) in g.iter_mut().enumerate() {
            *gk = (row[k] - log_z).exp() * scale;
        }
        g[l] -= scale;
    }
    Ok((total * scale, grad))
}

pub fn cross_entropy(tape: &mut Tape, logits: Var, labels: &[usize]) -> Result<Var> {
    let (value, grad) = cross_entropy_value(tape.value(logits), labels, IGNORE)?;
    tape.linearized_scalar(value, vec![(logits, grad)])
}

/// Lovasz-softmax surrogate of the Jaccard loss averaged over the classes
/// present among non-ignored labels, and its gradient with respect to `probs`.
///
/// Errors are sorted in decreasing order with ties kept in index order.
pub fn lovasz_softmax_value(probs: &Tensor, labels: &[usize], ignore: usize) -> Result<(f64, Vec<f64>)> {
    check_rows(probs, labels, "lovasz_softmax")?;
    let c = probs.cols();
    let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != ignore).collect();
    let mut grad = vec![0.0; probs.len()];
    let present: Vec<usize> = (0..c).filter(|&k| rows.iter().any(|&i| labels[i] == k)).collect();
    if present.is_empty() {
        return Ok((0.0, grad));
    }
    let scale = 1.0 / present.len() as f64;
    let mut total = 0.0;
    let mut order: Vec<usize> = Vec::with_capacity(rows.len());
    for &k in &present {
        let fg = |i: usize| labels[i] == k;
        let err = |i: usize| if fg(i) { 1.0 - probs.row(i)[k] } else { probs.row(i)[k] };
        order.clear();
        order.extend(rows.iter().copied());
        order.sort_by(|&a, &b| err(b).total_cmp(&err(a)));
        let gts = order.iter().filter(|&&i| fg(i)).count() as f64;
        let (mut fg_seen, mut bg_seen) = (0.0, 0.0);
        let mut prev = 0.0;
        for &i in &order {
            if fg(i) {
                fg_seen += 1.0;
            } else {
                bg_seen += 1.0;
            }
            let jaccard = 1.0 - (gts - fg_seen) / (gts + bg_seen);
            let slope = jaccard - prev;
            prev = jaccard;
            total += scale * slope * err(i);
            grad[i * c + k] += scale * slope * if fg(i) { -1.0 } else { 1.0 };
        }
    }
    Ok((total, grad))
}

pub fn lovasz_softmax(tape: &mut Tape, probs: Var, labels: &[usize]) -> Result<Var> {
    let (value, grad) = lovasz_softmax_value(tape.value(probs), labels, IGNORE)?;
    tape.linearized_scalar(value, vec![(probs, grad)])
}

/// Mean squared difference over the entries of rows with `mask[i]`, with the
/// gradient with respect to `pred` only; `target` is a constant.
pub fn pixel2point_value(pred: &Tensor, target: &Tensor, mask: &[bool]) -> Result<(f64, Vec<f64>)> {
    if pred.shape() != target.shape() || pred.rank() != 2 || pred.rows() != mask.len() {
        return Err(Error::shape(
            "pixel2point",
            format!("{:?} vs {:?} with {} mask bits", pred.shape(), target.shape(), mask.len()),
        ));
    }
    let c = pred.cols();
    let rows = mask.iter().filter(|&&m| m).count();
    let mut grad = vec![0.0; pred.len()];
    if rows == 0 || c == 0 {
        return Ok((0.0, grad));
    }
    let n = (rows * c) as f64;
    let mut total = 0.0;
    for i in (0..mask.len()).filter(|&i| mask[i]) {
        for (k, (p, t)) in pred.row(i).iter().zip(target.row(i)).enumerate() {
            let d = p - t;
            total += d * d;
            grad[i * c + k] = 2.0 * d / n;
        }
    }
    Ok((total / n, grad))
}

/// Completion loss: pseudo features regress onto camera features, which receive no gradient.
pub fn pixel2point_loss(tape: &mut Tape, f_pcam: Var, f_cam: Var, mask: &[bool]) -> Result<Var> {
    let (value, grad) = pixel2point_value(tape.value(f_pcam), tape.value(f_cam), mask)?;
    tape.linearized_scalar(value, vec![(f_pcam, grad)])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub point: f64,
    pub point_to_voxel: f64,
    pub point_to_pixel: f64,
    pub pixel_to_point: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { point: 1.0, point_to_voxel: 1.0, point_to_pixel: 0.5, pixel_to_point: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.point, self.point_to_voxel, self.point_to_pixel, self.pixel_to_point];
        if w.iter().all(|v| *v >= 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!("loss weights must be non-negative, got {w:?}")))
        }
    }
}

/// Scalar loss terms; absent terms belong to branches switched off.
#[derive(Clone, Copy, Debug, Default)]
pub struct LossParts {
    pub point: Option<Var>,
    pub point_to_voxel: Option<Var>,
    pub point_to_pixel: Option<Var>,
    pub pixel_to_point: Option<Var>,
}

impl LossParts {
    fn weighted(&self, w: &LossWeights) -> [(Option<Var>, f64); 4] {
        [
            (self.point, w.point),
            (self.point_to_voxel, w.point_to_voxel),
            (self.point_to_pixel, w.point_to_pixel),
            (self.pixel_to_point, w.pixel_to_point),
        ]
    }
}

pub fn total_loss(tape: &mut Tape, parts: &LossParts, weights: &LossWeights) -> Result<Var> {
    weights.validate()?;
    let mut acc: Option<Var> = None;
    for (part, w) in parts.weighted(weights) {
        let Some(v) = part else { continue };
        if tape.value(v).len() != 1 {
            return Err(Error::NonScalarLoss(tape.value(v).shape().to_vec()));
        }
        let term = tape.scale(v, w)?;
        acc = Some(match acc {
            Some(a) => tape.add(a, term)?,
            None => term,
        });
    }
    match acc {
        Some(a) => Ok(a),
        None => tape.constant(Tensor::scalar(0.0)),
    }
}
