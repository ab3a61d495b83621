use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::CLASS_NAMES;

use super::{AbsentClasses, ConfusionMatrix};

/// Which points count towards the headline metric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    #[default]
    All,
    InsideFov,
}

/// Upper edges of horizontal-range bins; a final open-ended bin follows the last edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DistanceBins(pub Vec<f64>);

impl Default for DistanceBins {
    fn default() -> Self {
        Self(vec![10.0, 20.0, 30.0, 40.0, 50.0])
    }
}

impl DistanceBins {
    pub fn validate(&self) -> Result<()> {
        let ok = self.0.iter().all(|e| *e > 0.0 && e.is_finite()) && self.0.windows(2).all(|w| w[0] < w[1]);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("distance bin edges must be positive and increasing, got {:?}", self.0)))
        }
    }

    pub fn len(&self) -> usize {
        self.0.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Bin of a point by `sqrt(x^2 + y^2)`.
    pub fn bin_of(&self, p: [f64; 3]) -> usize {
        let r = p[0].hypot(p[1]);
        self.0.iter().position(|&e| r < e).unwrap_or(self.0.len())
    }

    pub fn range(&self, k: usize) -> (f64, Option<f64>) {
        let lo = if k == 0 { 0.0 } else { self.0[k - 1] };
        (lo, self.0.get(k).copied())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinMetrics {
    pub min_range: f64,
    /// `None` for the open-ended last bin.
    pub max_range: Option<f64>,
    pub points: u64,
    /// `None` when no scored point fell in the bin.
    pub miou: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScopeCounts {
    pub inside_fov: u64,
    pub outside_fov: u64,
    pub total: u64,
}

/// The evaluation document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub scope: Scope,
    pub class_names: Vec<String>,
    /// Indexed by class id; `None` for the ignored class and classes that never occur.
    pub per_class_iou: Vec<Option<f64>>,
    pub miou: f64,
    /// Mean IoU over points inside the camera field of view.
    pub miou_fov: Option<f64>,
    /// `miou - miou_fov`.
    pub gap: Option<f64>,
    pub fwiou: f64,
    pub distance_bins: Vec<BinMetrics>,
    pub counts: ScopeCounts,
}

/// Accumulates confusion matrices over scenes.
#[derive(Clone, Debug)]
pub struct Evaluator {
    classes: usize,
    absent: AbsentClasses,
    bins: DistanceBins,
    inside: ConfusionMatrix,
    outside: ConfusionMatrix,
    per_bin: Vec<ConfusionMatrix>,
}

impl Evaluator {
    pub fn new(classes: usize, bins: DistanceBins, absent: AbsentClasses) -> Result<Self> {
        bins.validate()?;
        let per_bin = vec![ConfusionMatrix::new(classes); bins.len()];
        Ok(Self {
            classes,
            absent,
            bins,
            inside: ConfusionMatrix::new(classes),
            outside: ConfusionMatrix::new(classes),
            per_bin,
        })
    }

    /// Scores one scene. `fov[i]` marks points inside the camera field of view.
    pub fn add(&mut self, pred: &[usize], labels: &[usize], fov: &[bool], positions: &[[f64; 3]]) -> Result<()> {
        if positions.len() != labels.len() {
            return Err(Error::shape("Evaluator::add", "positions and labels differ in length"));
        }
        self.inside.accumulate(pred, labels, Some(fov))?;
        let outside: Vec<bool> = fov.iter().map(|b| !b).collect();
        self.outside.accumulate(pred, labels, Some(&outside))?;
        for k in 0..self.bins.len() {
            let in_bin: Vec<bool> = positions.iter().map(|&p| self.bins.bin_of(p) == k).collect();
            self.per_bin[k].accumulate(pred, labels, Some(&in_bin))?;
        }
        Ok(())
    }

    pub fn all(&self) -> ConfusionMatrix {
        let mut all = self.inside.clone();
        all.merge(&self.outside).expect("same size");
        all
    }

    pub fn inside(&self) -> &ConfusionMatrix {
        &self.inside
    }

    pub fn finish(&self, scope: Scope) -> Result<Metrics> {
        let all = self.all();
        let headline = match scope {
            Scope::All => &all,
            Scope::InsideFov => &self.inside,
        };
        let miou = headline.miou(self.absent)?;
        let miou_fov = (self.inside.total() > 0).then(|| self.inside.miou(self.absent)).transpose()?;
        let distance_bins = self
            .per_bin
            .iter()
            .enumerate()
            .map(|(k, cm)| {
                let (min_range, max_range) = self.bins.range(k);
                Ok(BinMetrics {
                    min_range,
                    max_range,
                    points: cm.total(),
                    miou: (cm.total() > 0).then(|| cm.miou(self.absent)).transpose()?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Metrics {
            scope,
            class_names: (0..self.classes)
                .map(|c| CLASS_NAMES.get(c).map_or_else(|| format!("class{c}"), |s| s.to_string()))
                .collect(),
            per_class_iou: headline.per_class_iou(),
            miou,
            miou_fov,
            gap: miou_fov.map(|f| miou - f),
            fwiou: headline.fwiou()?,
            distance_bins,
            counts: ScopeCounts { inside_fov: self.inside.total(), outside_fov: self.outside.total(), total: all.total() },
        })
    }
}
