//! Evaluation corpus: skeletons, realisations, MIDI files and `meta.jsonl`.

use std::fs;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::realise::{realize_skeleton, NhtKind, NonHarmonicTone, Realisation};
use super::skeleton::{bar_to_score, generate_skeleton, Skeleton};
use super::theory::Key;
use super::{child_seed, splitmix64, ChoraleError};
use crate::midi::write_midi;

const SKELETON_ATTEMPTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub n_skeletons: usize,
    pub realisations_per_skeleton: usize,
    pub nht_min: usize,
    pub nht_max: usize,
    pub n_chords: usize,
    pub kinds: Vec<NhtKind>,
    pub seed: u64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            n_skeletons: 10,
            realisations_per_skeleton: 9,
            nht_min: 0,
            nht_max: 8,
            n_chords: 4,
            kinds: NhtKind::ALL.to_vec(),
            seed: 0,
        }
    }
}

impl CorpusConfig {
    pub fn new(
        n_skeletons: usize,
        per_skeleton: usize,
        nht: RangeInclusive<usize>,
        seed: u64,
    ) -> Self {
        Self {
            n_skeletons,
            realisations_per_skeleton: per_skeleton,
            nht_min: *nht.start(),
            nht_max: *nht.end(),
            seed,
            ..Self::default()
        }
    }

    /// NHT count of the `r`-th realisation: cycles through the range.
    pub fn nht_count(&self, r: usize) -> usize {
        self.nht_min + r % (self.nht_max - self.nht_min + 1)
    }

    fn validate(&self) -> Result<(), ChoraleError> {
        if self.n_skeletons == 0 || self.realisations_per_skeleton == 0 {
            return Err(ChoraleError::InvalidParameters(
                "counts must be at least 1".into(),
            ));
        }
        if self.nht_min > self.nht_max {
            return Err(ChoraleError::InvalidParameters(format!(
                "empty NHT range {}..={}",
                self.nht_min, self.nht_max
            )));
        }
        if self.kinds.is_empty() {
            return Err(ChoraleError::InvalidParameters(
                "no NHT kinds allowed".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub skeleton: Skeleton,
    pub skeleton_seed: u64,
    pub realisations: Vec<Realisation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Skeleton,
    Realisation,
}

/// One line of `meta.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemMeta {
    pub item_id: String,
    pub kind: ItemKind,
    pub skeleton_id: String,
    pub tonality: String,
    pub key: Key,
    pub n_chords: usize,
    pub nht_count: usize,
    pub nhts: Vec<NonHarmonicTone>,
    pub seed: u64,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub skeletons: usize,
    pub realisations: usize,
    pub nht_histogram: Vec<usize>,
}

pub fn skeleton_id(index: usize) -> String {
    format!("sk{index:05}")
}

pub fn realisation_id(skeleton: usize, r: usize) -> String {
    format!("sk{skeleton:05}-r{r:03}")
}

/// Generates every skeleton and realisation in memory, in parallel across
/// skeletons; output order and content depend only on the configuration.
pub fn generate_corpus(cfg: &CorpusConfig) -> Result<Vec<CorpusEntry>, ChoraleError> {
    cfg.validate()?;
    (0..cfg.n_skeletons)
        .into_par_iter()
        .map(|k| generate_entry(cfg, k))
        .collect()
}

fn generate_entry(cfg: &CorpusConfig, k: usize) -> Result<CorpusEntry, ChoraleError> {
    let mut seed = child_seed(cfg.seed, k as u64, 0);
    let keys = Key::all();
    let mut skeleton = None;
    for _ in 0..SKELETON_ATTEMPTS {
        let key = *keys
            .choose(&mut ChaCha8Rng::seed_from_u64(seed))
            .expect("24 keys");
        match generate_skeleton(key, cfg.n_chords, seed) {
            Ok(s) => {
                skeleton = Some(s);
                break;
            }
            Err(ChoraleError::InfeasibleVoicing { .. }) => seed = splitmix64(seed),
            Err(e) => return Err(e),
        }
    }
    let mut skeleton = skeleton.ok_or(ChoraleError::InfeasibleVoicing { seed })?;
    skeleton.id = skeleton_id(k);
    let realisations = (0..cfg.realisations_per_skeleton)
        .map(|r| {
            let rs = child_seed(cfg.seed, k as u64, r as u64 + 1);
            let mut real = realize_skeleton(&skeleton, cfg.nht_count(r), &cfg.kinds, rs)?;
            real.id = realisation_id(k, r);
            Ok(real)
        })
        .collect::<Result<Vec<_>, ChoraleError>>()?;
    Ok(CorpusEntry {
        skeleton,
        skeleton_seed: seed,
        realisations,
    })
}

/// Metadata lines for a generated corpus: each skeleton followed by its realisations.
pub fn corpus_meta(entries: &[CorpusEntry]) -> Vec<ItemMeta> {
    let mut out = Vec::new();
    for e in entries {
        let s = &e.skeleton;
        out.push(ItemMeta {
            item_id: s.id.clone(),
            kind: ItemKind::Skeleton,
            skeleton_id: s.id.clone(),
            tonality: s.key.label(),
            key: s.key,
            n_chords: s.chords.len(),
            nht_count: 0,
            nhts: Vec::new(),
            seed: e.skeleton_seed,
            file: format!("skeletons/{}.mid", s.id),
        });
        for r in &e.realisations {
            out.push(ItemMeta {
                item_id: r.id.clone(),
                kind: ItemKind::Realisation,
                skeleton_id: s.id.clone(),
                tonality: s.key.label(),
                key: s.key,
                n_chords: s.chords.len(),
                nht_count: r.nht_count,
                nhts: r.nhts.clone(),
                seed: r.seed,
                file: format!("realisations/{}.mid", r.id),
            });
        }
    }
    out
}

/// Writes `skeletons/*.mid`, `realisations/*.mid` and `meta.jsonl` under `dir`.
pub fn build_eval_corpus(dir: &Path, cfg: &CorpusConfig) -> Result<CorpusSummary, ChoraleError> {
    let entries = generate_corpus(cfg)?;
    write_corpus(dir, &entries)?;
    let mut nht_histogram = vec![0; cfg.nht_max + 1];
    for r in entries.iter().flat_map(|e| &e.realisations) {
        nht_histogram[r.nht_count] += 1;
    }
    Ok(CorpusSummary {
        skeletons: entries.len(),
        realisations: entries.iter().map(|e| e.realisations.len()).sum(),
        nht_histogram,
    })
}

pub fn write_corpus(dir: &Path, entries: &[CorpusEntry]) -> Result<(), ChoraleError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |e: std::io::Error| ChoraleError::Io {
            path,
            message: e.to_string(),
        }
    };
    for sub in ["skeletons", "realisations"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(io(&p))?;
    }
    entries.par_iter().try_for_each(|e| {
        let p = dir.join(format!("skeletons/{}.mid", e.skeleton.id));
        fs::write(&p, write_midi(&bar_to_score(&e.skeleton.render()))).map_err(io(&p))?;
        for r in &e.realisations {
            let p = dir.join(format!("realisations/{}.mid", r.id));
            fs::write(&p, write_midi(&bar_to_score(&r.bar))).map_err(io(&p))?;
        }
        Ok(())
    })?;
    let p = dir.join("meta.jsonl");
    let mut out = Vec::new();
    for m in corpus_meta(entries) {
        serde_json::to_writer(&mut out, &m).expect("metadata serialises");
        out.push(b'\n');
    }
    fs::File::create(&p)
        .and_then(|mut f| f.write_all(&out))
        .map_err(io(&p))
}

pub fn read_meta(path: &Path) -> Result<Vec<ItemMeta>, ChoraleError> {
    let text = fs::read_to_string(path).map_err(|e| ChoraleError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ChoraleError::Meta {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
