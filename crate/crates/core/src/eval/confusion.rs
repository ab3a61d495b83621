use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::IGNORE;

/// How classes with no ground truth and no predictions enter the mean IoU.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsentClasses {
    /// Left out of the mean.
    #[default]
    Exclude,
    /// Counted with IoU 0 over a fixed number of classes.
    Zero,
}

/// Point counts, rows ground truth and columns prediction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self { classes, counts: vec![0; classes * classes] }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one count per point with a non-ignored label and `mask[i]` (when given).
    pub fn accumulate(&mut self, pred: &[usize], labels: &[usize], mask: Option<&[bool]>) -> Result<()> {
        if pred.len() != labels.len() || mask.is_some_and(|m| m.len() != labels.len()) {
            return Err(Error::shape(
                "accumulate",
                format!("{} predictions, {} labels, mask {:?}", pred.len(), labels.len(), mask.map(<[bool]>::len)),
            ));
        }
        for (i, (&p, &y)) in pred.iter().zip(labels).enumerate() {
            if y == IGNORE || mask.is_some_and(|m| !m[i]) {
                continue;
            }
            if p >= self.classes || y >= self.classes {
                return Err(Error::InvalidArgument(format!("class id {} outside {}", p.max(y), self.classes)));
            }
            self.counts[y * self.classes + p] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::shape("merge", "confusion matrices of different sizes"));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    fn tp_fp_fn(&self, c: usize) -> (u64, u64, u64) {
        let tp = self.get(c, c);
        let row: u64 = (0..self.classes).map(|p| self.get(c, p)).sum();
        let col: u64 = (0..self.classes).filter(|&t| t != IGNORE).map(|t| self.get(t, c)).sum();
        (tp, col - tp, row - tp)
    }

    /// `TP / (TP + FP + FN)`, `None` when the class never occurs in truth or prediction.
    pub fn iou(&self, c: usize) -> Option<f64> {
        let (tp, fp, fn_) = self.tp_fp_fn(c);
        let denom = tp + fp + fn_;
        (denom > 0).then(|| tp as f64 / denom as f64)
    }

    /// IoU of every class except the ignored one, indexed by class id.
    pub fn per_class_iou(&self) -> Vec<Option<f64>> {
        (0..self.classes).map(|c| if c == IGNORE { None } else { self.iou(c) }).collect()
    }

    pub fn miou(&self, absent: AbsentClasses) -> Result<f64> {
        if self.total() == 0 {
            return Err(Error::Empty("mean IoU of an empty confusion matrix"));
        }
        let ious = self.per_class_iou();
        let scored = (0..self.classes).filter(|&c| c != IGNORE);
        let (sum, n) = match absent {
            AbsentClasses::Exclude => scored.filter_map(|c| ious[c]).fold((0.0, 0), |(s, n), v| (s + v, n + 1)),
            AbsentClasses::Zero => scored.fold((0.0, 0), |(s, n), c| (s + ious[c].unwrap_or(0.0), n + 1)),
        };
        Ok(sum / n as f64)
    }

    /// Per-class IoU weighted by ground-truth point counts.
    pub fn fwiou(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::Empty("frequency-weighted IoU of an empty confusion matrix"));
        }
        let mut acc = 0.0;
        for c in (0..self.classes).filter(|&c| c != IGNORE) {
            let freq: u64 = (0..self.classes).map(|p| self.get(c, p)).sum();
            if freq > 0 {
                acc += freq as f64 * self.iou(c).unwrap_or(0.0);
            }
        }
        Ok(acc / total as f64)
    }
}
