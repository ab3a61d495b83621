//! File-level entry points behind the command-line subcommands.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::Metrics;
use crate::model::Model;

use super::{ablate, evaluate, generate_corpus, load_corpus, train, AblationReport, AblationRow, CorpusManifest, ExperimentConfig, IterationLog, TrainLog};

pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const TRAIN_LOG: &str = "train_log.json";
pub const METRICS: &str = "metrics.json";
pub const ABLATION: &str = "ablation.json";
pub const RESOLVED_CONFIG: &str = "config.toml";

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn prepare_out(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let path = out.join(RESOLVED_CONFIG);
    fs::write(&path, cfg.to_toml()?).map_err(|e| Error::io(path, e))
}

/// Writes the train and val splits under `out`.
pub fn cmd_generate(cfg: &ExperimentConfig, out: &Path) -> Result<CorpusManifest> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    generate_corpus(cfg, out)
}

/// Trains on the train split; writes `checkpoint/` and `train_log.json` under `out`.
pub fn cmd_train(
    cfg: &ExperimentConfig,
    corpus: &Path,
    out: &Path,
    progress: impl FnMut(&IterationLog),
) -> Result<TrainLog> {
    cfg.validate()?;
    let (_, scenes) = load_corpus(corpus)?;
    prepare_out(cfg, out)?;
    let (model, log) = train(cfg, &scenes.train, progress)?;
    model.save(&out.join(CHECKPOINT_DIR))?;
    write_json(&out.join(TRAIN_LOG), &log)?;
    Ok(log)
}

/// Scores `checkpoint` on the val split; writes `metrics.json` under `out`.
pub fn cmd_eval(cfg: &ExperimentConfig, corpus: &Path, checkpoint: &Path, out: &Path) -> Result<Metrics> {
    cfg.validate()?;
    let model = Model::load(checkpoint, cfg.model.clone(), cfg.toggles.clone())?;
    let (_, scenes) = load_corpus(corpus)?;
    let metrics = evaluate(&model, &scenes.val, &cfg.eval)?;
    prepare_out(cfg, out)?;
    write_json(&out.join(METRICS), &metrics)?;
    Ok(metrics)
}

/// Runs the ablation grid; writes `ablation.json` under `out`.
pub fn cmd_ablate(
    cfg: &ExperimentConfig,
    corpus: &Path,
    out: &Path,
    progress: impl FnMut(&AblationRow),
) -> Result<AblationReport> {
    cfg.validate()?;
    let (_, scenes) = load_corpus(corpus)?;
    prepare_out(cfg, out)?;
    let report = ablate(cfg, &scenes, progress)?;
    write_json(&out.join(ABLATION), &report)?;
    Ok(report)
}
