use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{generate_sequence, SceneBundle};

use super::{derive_seed, streams, ExperimentConfig};

pub const CORPUS_MANIFEST: &str = "corpus.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn dir_name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

/// Index of a generated corpus directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub seed: u64,
    pub sweeps: usize,
    pub train: Vec<String>,
    pub val: Vec<String>,
}

/// Scenes held in memory.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    pub train: Vec<SceneBundle>,
    pub val: Vec<SceneBundle>,
}

/// Generation seed of scene `index` of `split`.
pub fn scene_seed(seed: u64, split: Split, index: usize) -> u64 {
    let stream = match split {
        Split::Train => streams::TRAIN_SCENES,
        Split::Val => streams::VAL_SCENES,
    };
    derive_seed(seed, stream, index as u64)
}

fn scene_name(index: usize) -> String {
    format!("scene_{index:05}")
}

/// Generates both splits in memory.
pub fn build_corpus(cfg: &ExperimentConfig) -> Result<Corpus> {
    let make = |split: Split, n: usize| -> Result<Vec<SceneBundle>> {
        (0..n)
            .map(|i| {
                let mut s = generate_sequence(scene_seed(cfg.seed, split, i), &cfg.scene, cfg.corpus.sweeps)?;
                s.id = format!("{}/{}", split.dir_name(), scene_name(i));
                Ok(s)
            })
            .collect()
    };
    Ok(Corpus { train: make(Split::Train, cfg.corpus.train_scenes)?, val: make(Split::Val, cfg.corpus.val_scenes)? })
}

/// Writes `corpus` under `dir` as `train/` and `val/` scene directories plus an index.
pub fn save_corpus(cfg: &ExperimentConfig, corpus: &Corpus, dir: &Path) -> Result<CorpusManifest> {
    let mut manifest = CorpusManifest { seed: cfg.seed, sweeps: cfg.corpus.sweeps, train: Vec::new(), val: Vec::new() };
    for (split, scenes) in [(Split::Train, &corpus.train), (Split::Val, &corpus.val)] {
        let names = match split {
            Split::Train => &mut manifest.train,
            Split::Val => &mut manifest.val,
        };
        for (i, scene) in scenes.iter().enumerate() {
            let name = scene_name(i);
            scene.save(&dir.join(split.dir_name()).join(&name))?;
            names.push(name);
        }
    }
    let path = dir.join(CORPUS_MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(path, e))?;
    Ok(manifest)
}

pub fn generate_corpus(cfg: &ExperimentConfig, dir: &Path) -> Result<CorpusManifest> {
    cfg.validate()?;
    save_corpus(cfg, &build_corpus(cfg)?, dir)
}

pub fn load_corpus(dir: &Path) -> Result<(CorpusManifest, Corpus)> {
    let path = dir.join(CORPUS_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: CorpusManifest =
        serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
    let load = |split: Split, names: &[String]| -> Result<Vec<SceneBundle>> {
        names.iter().map(|n| SceneBundle::load(&scene_dir(dir, split, n))).collect()
    };
    let corpus = Corpus { train: load(Split::Train, &manifest.train)?, val: load(Split::Val, &manifest.val)? };
    Ok((manifest, corpus))
}

fn scene_dir(root: &Path, split: Split, name: &str) -> PathBuf {
    root.join(split.dir_name()).join(name)
}
