use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Toggles, Variant};

use super::{evaluate, train, Corpus, ExperimentConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    /// One fusion variant trained and evaluated as configured.
    Variant,
    /// The richest variant evaluated with cameras `0..dropped_cameras` broken.
    CameraDrop,
    /// The richest variant evaluated with `frames` sweeps collapsed.
    Frames,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub seed: u64,
    pub kind: RowKind,
    pub variant: Variant,
    pub dropped_cameras: usize,
    pub frames: usize,
    pub miou: f64,
    pub miou_fov: Option<f64>,
    pub gap: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn variant(&self, seed: u64, v: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.seed == seed && r.kind == RowKind::Variant && r.variant == v)
    }

    pub fn camera_drop(&self, seed: u64, dropped: usize) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.seed == seed && r.kind == RowKind::CameraDrop && r.dropped_cameras == dropped)
    }

    pub fn frames(&self, seed: u64, frames: usize) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.seed == seed && r.kind == RowKind::Frames && r.frames == frames)
    }
}

/// Trains every configured variant for every seed and evaluates it on the
/// validation split, then sweeps broken cameras and sweep counts on the
/// richest variant. `progress` receives one line per finished row.
pub fn ablate(cfg: &ExperimentConfig, corpus: &Corpus, mut progress: impl FnMut(&AblationRow)) -> Result<AblationReport> {
    cfg.validate()?;
    let a = &cfg.ablate;
    if a.variants.is_empty() || a.seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one variant and one seed".into()));
    }
    let val = match a.val_scenes {
        Some(n) if n < corpus.val.len() => &corpus.val[..n],
        _ => &corpus.val[..],
    };
    let richest = *a
        .variants
        .iter()
        .max_by_key(|&&v| Variant::ALL.iter().position(|&x| x == v))
        .expect("non-empty");
    let mut report = AblationReport::default();
    let mut push = |row: AblationRow, report: &mut AblationReport| {
        progress(&row);
        report.rows.push(row);
    };
    for &seed in &a.seeds {
        let mut kept = None;
        for &variant in &a.variants {
            let mut run = cfg.clone();
            run.seed = seed;
            run.toggles = cfg.toggles_for(variant);
            if let Some(n) = a.iterations {
                run.train.iterations = n;
            }
            let (model, _) = train(&run, &corpus.train, |_| {})?;
            let m = evaluate(&model, val, &cfg.eval)?;
            let row = AblationRow {
                seed,
                kind: RowKind::Variant,
                variant,
                dropped_cameras: model.toggles.dropped_cameras.len(),
                frames: model.toggles.multi_frame_count,
                miou: m.miou,
                miou_fov: m.miou_fov,
                gap: m.gap,
            };
            push(row, &mut report);
            if variant == richest {
                kept = Some(model);
            }
        }
        let mut model = kept.expect("richest variant was trained");
        let base = model.toggles.clone();
        for &k in &a.camera_drops {
            model.toggles = Toggles { dropped_cameras: (0..k).collect(), ..base.clone() };
            let m = evaluate(&model, val, &cfg.eval)?;
            let row = AblationRow {
                seed,
                kind: RowKind::CameraDrop,
                variant: richest,
                dropped_cameras: k,
                frames: base.multi_frame_count,
                miou: m.miou,
                miou_fov: m.miou_fov,
                gap: m.gap,
            };
            push(row, &mut report);
        }
        for &f in &a.frame_counts {
            model.toggles = Toggles { multi_frame_count: f, ..base.clone() };
            let m = evaluate(&model, val, &cfg.eval)?;
            let row = AblationRow {
                seed,
                kind: RowKind::Frames,
                variant: richest,
                dropped_cameras: base.dropped_cameras.len(),
                frames: f,
                miou: m.miou,
                miou_fov: m.miou_fov,
                gap: m.gap,
            };
            push(row, &mut report);
        }
    }
    Ok(report)
}
