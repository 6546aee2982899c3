//! Corpora, the gallery/probe experiments, ROC/EER and the guessing bound.

mod corpus;
mod experiment;
mod layout;
mod report;
mod roc;
mod security;
mod split;
mod synth;

pub use corpus::{Corpus, Session, Take, MIN_ENROLL_TAKES, MIN_IMPOSTER_TAKES, MIN_PHRASES};
pub use experiment::{
    build_models, run_baseline, run_baseline_on, run_vaulted, run_vaulted_on, ExperimentConfig, ModelSet,
    PhraseModels, TrialOutcome, VaultedMode,
};
pub use layout::{load_mit_layout, write_mit_layout, MANIFEST_NAME};
pub use report::{
    read_outcomes_csv, read_roc_summary, run_evaluation, write_outcomes_csv, write_roc_csv, EvalOutputs,
    EvalSettings, ReferencePoint, REFERENCE_POINTS,
};
pub use roc::{
    best_threshold_item_accuracy, best_threshold_pair_accuracy, compute_roc, pairwise_correct, RocCurve, RocPoint,
    ScoreKind,
};
pub use security::{security_report, SecurityReport};
pub use split::{gallery_count, PhraseSplit, SplitPlan};
pub use synth::{synth_corpus, synth_corpus_with, SynthConfig, DEFAULT_SEPARATION};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::AudioError;
use crate::gmm::GmmError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Model(#[from] GmmError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest not found at {0}")]
    MissingManifest(String),
    #[error("invalid corpus:\n  {}", .0.join("\n  "))]
    InvalidCorpus(Vec<String>),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("ROC needs both genuine and imposter outcomes")]
    SingleClass,
    #[error("outcomes mix score kinds")]
    MixedScoreKinds,
    #[error("csv: {0}")]
    Csv(String),
}

impl EvalError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        EvalError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Independent sub-seed for a labelled part of an experiment.
pub(crate) fn derive_seed(seed: u64, parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}
