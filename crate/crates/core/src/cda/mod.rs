//! Counterfactual data augmentation.
//!
//! Builds gender swap maps from term and name pairs, selects culturally
//! relevant sentences by keyword, writes swapped copies, pairs male and
//! female names by edit distance, and composes fine-tuning manifests.

mod filter;
mod manifest;
mod pairing;
mod swap;
mod work_order;

pub use filter::{filter_by_keywords, KeywordSet, DEFAULT_TARGET};
pub use manifest::{
    compose_manifest, compose_manifest_with, CdaSetup, DatasetCatalog, DatasetEntry, Hyperparameters, Schedule,
    TrainingManifest, DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE, DEFAULT_STEPS, DEFAULT_WEIGHT_DECAY,
};
pub use pairing::{levenshtein, pair_names_greedy, read_name_list, NameMatch};
pub use swap::{
    build_swap_map, generate_corpus, generate_counterfactual, load_term_pairs, read_term_pairs, CounterfactualRecord,
    SwapMap, TermPair,
};
pub use work_order::{assemble_translations, translation_orders, TranslationItem};

use crate::lang::Language;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CdaError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid term pair {0}")]
    InvalidTermPair(String),
    #[error("swap conflict on `{token}`: already paired with `{existing}`, now with `{new}`")]
    Conflict { token: String, existing: String, new: String },
    #[error("keyword set is empty")]
    EmptyKeywords,
    #[error("target sentence count must be at least 1")]
    InvalidTarget,
    #[error("{0} name list is empty")]
    EmptyNameList(&'static str),
    #[error("name `{0}` appears twice in its list")]
    DuplicateName(String),
    #[error("unknown CDA setup `{0}`")]
    UnknownSetup(String),
    #[error("{0}")]
    SetupLanguage(String),
    #[error("no CDA dataset for `{0}` in the catalog")]
    MissingDataset(Language),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
    #[error("translation work order: {0}")]
    WorkOrder(String),
}

impl CdaError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CdaError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
