//! Synthetic four-part chorale bars for evaluation.
//!
//! A [`Skeleton`] is a short functional progression voiced for SATB; a
//! [`Realisation`] decorates it with labelled non-harmonic tones and keeps the
//! link back to its skeleton. The grammar is deliberately small: diatonic
//! root-position triads, major or harmonic minor keys, and classical
//! voice-leading constraints.

mod corpus;
mod realise;
mod skeleton;
mod theory;
mod verify;

use std::path::PathBuf;

use thiserror::Error;

pub use corpus::{
    build_eval_corpus, corpus_meta, generate_corpus, read_meta, realisation_id, skeleton_id,
    write_corpus, CorpusConfig, CorpusEntry, CorpusSummary, ItemKind, ItemMeta,
};
pub use realise::{
    insertion_sites, nht_span, realize_skeleton, render_realisation, NhtKind, NonHarmonicTone,
    Realisation, Site,
};
pub use skeleton::{
    bar_to_score, check_skeleton, generate_skeleton, voicings, Chord, Skeleton, SkeletonIssue,
    ALTO, BASS, QUANTUM, RANGES, SOPRANO, TENOR, VOICES, VOICE_NAMES,
};
pub use theory::{roman, Function, Key, Mode};
pub use verify::{verify_realisation, RealisationIssue, VerifyReport};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChoraleError {
    #[error("chord count {0} must divide the bar into spans of at least 2 columns")]
    InvalidChordCount(usize),
    #[error("no voicing found within the search budget (seed {seed:#x})")]
    InfeasibleVoicing { seed: u64 },
    #[error("requested {requested} non-harmonic tones, only {available} insertion sites usable")]
    InsufficientSites { requested: usize, available: usize },
    #[error("invalid corpus parameters: {0}")]
    InvalidParameters(String),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("meta.jsonl line {line}: {message}")]
    Meta { line: usize, message: String },
}

/// SplitMix64 finaliser.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-item seed derived from the corpus seed and the item's coordinates,
/// independent of scheduling order.
pub fn child_seed(seed: u64, skeleton: u64, realisation: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ skeleton) ^ realisation)
}
