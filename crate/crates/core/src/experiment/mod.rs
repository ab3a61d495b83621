//! Corpus generation, training, evaluation and ablation sweeps driven by one
//! config document.

mod ablate;
mod commands;
mod config;
mod corpus;
mod evaluate;
mod train;
#[cfg(test)]
mod tests;

pub use ablate::{ablate, AblationReport, AblationRow, RowKind};
pub use commands::{cmd_ablate, cmd_eval, cmd_generate, cmd_train};
pub use config::{AblateConfig, CorpusConfig, EvalConfig, ExperimentConfig, TrainConfig};
pub use corpus::{build_corpus, generate_corpus, load_corpus, save_corpus, scene_seed, Corpus, CorpusManifest, Split};
pub use evaluate::evaluate;
pub use train::{train, IterationLog, TrainLog};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent 64-bit seed for `(stream, index)` under a base seed.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(stream);
    rng.set_word_pos(u128::from(index) * 2);
    rng.next_u64()
}

pub(crate) mod streams {
    pub const TRAIN_SCENES: u64 = 1;
    pub const VAL_SCENES: u64 = 2;
    pub const INIT: u64 = 3;
    pub const BATCHES: u64 = 4;
}
