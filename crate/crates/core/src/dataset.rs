//! Dataset pipeline: MIDI corpus to per-representation tensors, plus the
//! round-trip audit of a built dataset.
//!
//! Output layout:
//!
//! ```text
//! <out>/manifest.json
//! <out>/{train,test}/<representation>.ptns
//! <out>/{train,test}/bars.jsonl
//! ```
//!
//! Row `i` of every tensor in a split encodes line `i` of that split's `bars.jsonl`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{
    decode_mono, decode_tokens, encode_midilike, encode_mono, event_count, MidiLikeConfig,
    MonoToken, DEFAULT_MAX_EVENTS,
};
use crate::midi::parse_midi;
use crate::model::{
    augmentation_shifts, slice_into_bars, Bar, GridNote, PianoRoll, DEFAULT_STEPS, DEFAULT_VELOCITY,
};
use crate::notetuple::{decode_notetuple, encode_notetuple, TupleSequence, DEFAULT_MAX_TUPLES};
use crate::signal::{PrimeMap, SignalCodec, SignalError, SpectralConfig};
use crate::tensor::{Tensor, TensorData, TensorError};

pub const MANIFEST_VERSION: u32 = 1;
pub const SPLITS: [&str; 2] = ["train", "test"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Pianoroll,
    Midilike,
    MidilikeMono,
    Notetuple,
    Signallike,
}

impl Representation {
    pub const ALL: [Representation; 5] = [
        Representation::Pianoroll,
        Representation::Midilike,
        Representation::MidilikeMono,
        Representation::Notetuple,
        Representation::Signallike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Representation::Pianoroll => "pianoroll",
            Representation::Midilike => "midilike",
            Representation::MidilikeMono => "midilike_mono",
            Representation::Notetuple => "notetuple",
            Representation::Signallike => "signallike",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Representation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Representation::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| format!("unknown representation `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub representations: Vec<Representation>,
    pub steps_per_bar: usize,
    pub max_events: usize,
    pub max_tuples: usize,
    pub velocity_bins: usize,
    pub augment: bool,
    /// Fraction of chorales assigned to the training split.
    pub split_ratio: f64,
    pub seed: u64,
    pub spectral: SpectralConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            representations: vec![
                Representation::Pianoroll,
                Representation::Midilike,
                Representation::Notetuple,
                Representation::Signallike,
            ],
            steps_per_bar: DEFAULT_STEPS,
            max_events: DEFAULT_MAX_EVENTS,
            max_tuples: DEFAULT_MAX_TUPLES,
            velocity_bins: 1,
            augment: false,
            split_ratio: 0.8,
            seed: 0,
            spectral: SpectralConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidConfig(m));
        if self.representations.is_empty() {
            return bad("no representations selected".into());
        }
        let mut sorted = self.representations.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.representations.len() {
            return bad("representation listed twice".into());
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return bad(format!("split_ratio {} outside (0, 1)", self.split_ratio));
        }
        if self.steps_per_bar == 0
            || self.max_events == 0
            || self.max_tuples == 0
            || self.velocity_bins == 0
        {
            return bad("steps, budgets and velocity bins must be positive".into());
        }
        if self.steps_per_bar > usize::from(u8::MAX) {
            return bad("steps_per_bar must fit a TIME_SHIFT token".into());
        }
        if self.representations.contains(&Representation::Signallike) {
            SignalCodec::new(self.spectral, PrimeMap::default())?;
        }
        Ok(())
    }

    pub fn midilike(&self) -> MidiLikeConfig {
        MidiLikeConfig {
            steps: self.steps_per_bar,
            max_events: self.max_events,
            velocity_bins: self.velocity_bins,
            default_velocity: DEFAULT_VELOCITY,
        }
    }

    /// Tensor shape of one encoded bar.
    pub fn row_shape(&self, rep: Representation) -> Vec<usize> {
        match rep {
            Representation::Pianoroll => vec![crate::model::PITCHES, self.steps_per_bar],
            Representation::Midilike => vec![self.max_events],
            Representation::MidilikeMono => vec![self.steps_per_bar],
            Representation::Notetuple => vec![self.max_tuples, 4],
            Representation::Signallike => vec![self.spectral.signal_len(self.steps_per_bar)],
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("invalid pipeline configuration: {0}")]
    InvalidConfig(String),
    #[error("empty dataset: no bar survived parsing and filtering")]
    EmptyDataset,
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("bar cannot be encoded as {rep}: {message}")]
    Encode {
        rep: Representation,
        message: String,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Why a bar was left out of the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    OverEventBudget,
    OverTupleBudget,
    NotMonophonic,
}

impl DropReason {
    pub const ALL: [DropReason; 3] = [
        DropReason::OverEventBudget,
        DropReason::OverTupleBudget,
        DropReason::NotMonophonic,
    ];
}

/// Source of one dataset row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BarRecord {
    pub source: String,
    pub bar_index: usize,
    pub shift: i32,
    pub steps: usize,
    pub quantum: u64,
    pub notes: Vec<GridNote>,
}

impl BarRecord {
    pub fn bar(&self) -> Bar {
        Bar::from_grid(self.bar_index, self.quantum, self.steps, &self.notes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub chorales: Vec<String>,
    pub bars: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub split: String,
    pub representation: Representation,
    pub file: String,
    pub dtype: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub config: PipelineConfig,
    pub files_found: usize,
    pub files_parsed: usize,
    pub skipped_files: Vec<SkippedFile>,
    pub bars_in: usize,
    pub bars_kept: usize,
    pub dropped: BTreeMap<DropReason, usize>,
    /// `bars_kept / bars_in`.
    pub retention_rate: f64,
    /// Share of bars passing the event budget alone.
    pub event_filter_retention: f64,
    pub splits: BTreeMap<String, SplitInfo>,
    pub tensors: Vec<TensorInfo>,
}

/// MIDI files under `dir`, sorted by path.
pub fn midi_files(dir: &Path) -> Result<Vec<PathBuf>, DatasetError> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| DatasetError::Format {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
        let is_midi = entry
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"));
        if entry.file_type().is_file() && is_midi {
            out.push(entry.into_path());
        }
    }
    out.sort();
    Ok(out)
}

struct Piece {
    name: String,
    bars: Vec<Bar>,
    range: Option<(u8, u8)>,
}

fn load_piece(path: &Path, root: &Path, steps: usize) -> Result<Piece, String> {
    let bytes = fs::read(path).map_err(|e| e.to_string())?;
    let (score, diag) = parse_midi(&bytes).map_err(|e| e.to_string())?;
    for (offset, w) in &diag.warnings {
        warn!("{}: byte {offset}: {w}", path.display());
    }
    let bars = slice_into_bars(&score, steps).map_err(|e| e.to_string())?;
    let name = path
        .strip_prefix(root)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/");
    Ok(Piece {
        name,
        bars,
        range: score.pitch_range(),
    })
}

/// First filter a bar fails, if any.
pub fn drop_reason(bar: &Bar, cfg: &PipelineConfig) -> Option<DropReason> {
    match event_count(bar, &cfg.midilike()) {
        Ok(n) if n <= cfg.max_events => {}
        _ => return Some(DropReason::OverEventBudget),
    }
    if cfg.representations.contains(&Representation::Notetuple)
        && bar.grid_notes().len() > cfg.max_tuples
    {
        return Some(DropReason::OverTupleBudget);
    }
    if cfg.representations.contains(&Representation::MidilikeMono) && !bar.is_monophonic() {
        return Some(DropReason::NotMonophonic);
    }
    None
}

/// Encodes bars as one tensor of shape `N x row_shape(rep)`.
pub fn encode_bars(
    bars: &[Bar],
    rep: Representation,
    cfg: &PipelineConfig,
) -> Result<Tensor, DatasetError> {
    let mut dims = vec![bars.len()];
    dims.extend(cfg.row_shape(rep));
    let fail = |e: &dyn fmt::Display| DatasetError::Encode {
        rep,
        message: e.to_string(),
    };
    let data = match rep {
        Representation::Pianoroll => TensorData::F32(
            bars.par_iter()
                .flat_map_iter(|b| PianoRoll::from_bar(b).to_f32())
                .collect(),
        ),
        Representation::Midilike => {
            let ml = cfg.midilike();
            let rows = bars
                .par_iter()
                .map(|b| {
                    encode_midilike(b, &ml)
                        .map(|s| s.tokens(ml.steps))
                        .map_err(|e| fail(&e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            TensorData::I32(rows.concat())
        }
        Representation::MidilikeMono => {
            let rows = bars
                .par_iter()
                .map(|b| {
                    encode_mono(b, cfg.steps_per_bar)
                        .map(|t| t.into_iter().map(MonoToken::token).collect::<Vec<_>>())
                        .map_err(|e| fail(&e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            TensorData::I32(rows.concat())
        }
        Representation::Notetuple => {
            let rows = bars
                .par_iter()
                .map(|b| {
                    encode_notetuple(b, cfg.max_tuples)
                        .map(|s| s.to_i32())
                        .map_err(|e| fail(&e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            TensorData::I32(rows.concat())
        }
        Representation::Signallike => {
            let codec = SignalCodec::new(cfg.spectral, PrimeMap::default())?;
            let rows = bars
                .par_iter()
                .map(|b| codec.encode(&PianoRoll::from_bar(b)).map(|s| s.to_f32()))
                .collect::<Result<Vec<_>, _>>()?;
            TensorData::F32(rows.concat())
        }
    };
    Ok(Tensor::new(dims, data)?)
}

/// Parses, slices, filters, augments, splits and encodes a MIDI corpus.
pub fn build_dataset(
    corpus_dir: &Path,
    out_dir: &Path,
    cfg: &PipelineConfig,
) -> Result<Manifest, DatasetError> {
    cfg.validate()?;
    let files = midi_files(corpus_dir)?;
    let loaded: Vec<(PathBuf, Result<Piece, String>)> = files
        .par_iter()
        .map(|p| (p.clone(), load_piece(p, corpus_dir, cfg.steps_per_bar)))
        .collect();
    let mut skipped_files = Vec::new();
    let mut pieces = Vec::new();
    for (path, result) in loaded {
        match result {
            Ok(piece) => pieces.push(piece),
            Err(reason) => {
                warn!("skipping {}: {reason}", path.display());
                skipped_files.push(SkippedFile {
                    path: path.display().to_string(),
                    reason,
                });
            }
        }
    }
    let corpus_range =
        pieces
            .iter()
            .filter_map(|p| p.range)
            .fold(None, |acc: Option<(u8, u8)>, (lo, hi)| {
                Some(acc.map_or((lo, hi), |(a, b)| (a.min(lo), b.max(hi))))
            });

    let mut order: Vec<usize> = (0..pieces.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let n_train = match pieces.len() {
        0 | 1 => pieces.len(),
        n => ((n as f64 * cfg.split_ratio).round() as usize).clamp(1, n - 1),
    };
    let mut split_of = vec![1usize; pieces.len()];
    for &i in &order[..n_train] {
        split_of[i] = 0;
    }

    let mut dropped: BTreeMap<DropReason, usize> =
        DropReason::ALL.iter().map(|&r| (r, 0)).collect();
    let mut bars_in = 0;
    let mut kept: [Vec<BarRecord>; 2] = [Vec::new(), Vec::new()];
    for (i, piece) in pieces.iter().enumerate() {
        let shifts = match (cfg.augment, piece.range, corpus_range) {
            (true, Some(range), Some(corpus)) => augmentation_shifts(range, corpus).collect(),
            _ => vec![0],
        };
        for shift in shifts {
            for bar in &piece.bars {
                let bar = crate::model::transpose_bar(bar, shift)
                    .expect("shift stays inside the corpus range");
                bars_in += 1;
                if let Some(reason) = drop_reason(&bar, cfg) {
                    *dropped.get_mut(&reason).expect("all reasons present") += 1;
                    continue;
                }
                kept[split_of[i]].push(BarRecord {
                    source: piece.name.clone(),
                    bar_index: bar.index,
                    shift,
                    steps: bar.steps,
                    quantum: bar.quantum,
                    notes: bar.grid_notes(),
                });
            }
        }
    }
    let bars_kept = kept[0].len() + kept[1].len();
    if bars_kept == 0 {
        return Err(DatasetError::EmptyDataset);
    }

    let mut splits = BTreeMap::new();
    let mut tensors = Vec::new();
    for (s, name) in SPLITS.iter().enumerate() {
        let dir = out_dir.join(name);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let records = &kept[s];
        write_jsonl(&dir.join("bars.jsonl"), records)?;
        let bars: Vec<Bar> = records.iter().map(BarRecord::bar).collect();
        for &rep in &cfg.representations {
            let tensor = encode_bars(&bars, rep, cfg)?;
            let file = format!("{name}/{rep}.ptns");
            tensor.write(&out_dir.join(&file))?;
            tensors.push(TensorInfo {
                split: name.to_string(),
                representation: rep,
                file,
                dtype: tensor.data().dtype_name().to_string(),
                shape: tensor.dims().to_vec(),
            });
        }
        let mut chorales: Vec<String> = (0..pieces.len())
            .filter(|&i| split_of[i] == s)
            .map(|i| pieces[i].name.clone())
            .collect();
        chorales.sort();
        splits.insert(
            name.to_string(),
            SplitInfo {
                chorales,
                bars: records.len(),
            },
        );
    }

    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        config: cfg.clone(),
        files_found: files.len(),
        files_parsed: pieces.len(),
        skipped_files,
        bars_in,
        bars_kept,
        retention_rate: bars_kept as f64 / bars_in as f64,
        event_filter_retention: (bars_in - dropped[&DropReason::OverEventBudget]) as f64
            / bars_in as f64,
        dropped,
        splits,
        tensors,
    };
    let path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    info!(
        "kept {bars_kept} of {bars_in} bars ({:.2}%), dropped {:?}",
        100.0 * manifest.retention_rate,
        manifest.dropped
    );
    Ok(manifest)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), DatasetError> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r).expect("row serialises");
        out.push(b'\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(io_err(path))
}

pub fn read_manifest(dataset_dir: &Path) -> Result<Manifest, DatasetError> {
    let path = dataset_dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| DatasetError::Format {
        path,
        message: e.to_string(),
    })
}

pub fn read_bar_records(path: &Path) -> Result<Vec<BarRecord>, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| DatasetError::Format {
                path: path.to_path_buf(),
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub split: String,
    pub row: usize,
    pub source: String,
    pub bar_index: usize,
    pub shift: i32,
    /// `hold_merge` when only re-articulations of held pitches were lost.
    pub category: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationReport {
    pub representation: Representation,
    pub rows: usize,
    pub exact: usize,
    pub rate: f64,
    pub mismatches: Vec<Mismatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub representations: Vec<RepresentationReport>,
}

impl RoundtripReport {
    pub fn all_exact(&self) -> bool {
        self.representations.iter().all(|r| r.exact == r.rows)
    }

    pub fn rate(&self, rep: Representation) -> Option<f64> {
        self.representations
            .iter()
            .find(|r| r.representation == rep)
            .map(|r| r.rate)
    }
}

/// (start, len, pitch) triples: the content shared by every representation.
fn shape_of(notes: &[GridNote]) -> Vec<(usize, usize, u8)> {
    let mut v: Vec<_> = notes.iter().map(|g| (g.start, g.len, g.pitch)).collect();
    v.sort_unstable();
    v
}

/// Compares one decoded row with its source; `None` when exact.
fn check_row(
    rep: Representation,
    row: &TensorData,
    range: std::ops::Range<usize>,
    rec: &BarRecord,
    cfg: &PipelineConfig,
    codec: Option<&SignalCodec>,
) -> Option<(String, String)> {
    let source = rec.bar();
    let merged = source.merged_grid_notes();
    let content = |detail: String| Some(("content".to_string(), detail));
    let diff = |got: &[(usize, usize, u8)], want: &[(usize, usize, u8)]| {
        let missing: Vec<_> = want.iter().filter(|n| !got.contains(n)).collect();
        let extra: Vec<_> = got.iter().filter(|n| !want.contains(n)).collect();
        format!("missing (start, len, pitch) {missing:?}, unexpected {extra:?}")
    };
    match (rep, row) {
        (Representation::Pianoroll, TensorData::F32(v)) => {
            let roll = PianoRoll::from_f32(&v[range], rec.steps, rec.quantum)?;
            let want = PianoRoll::from_bar(&source);
            if roll != want {
                return content(format!(
                    "{} cells differ",
                    (0..rec.steps)
                        .map(|t| (roll.columns()[t] ^ want.columns()[t]).count_ones())
                        .sum::<u32>()
                ));
            }
            let (got, want) = (shape_of(&roll.to_bar().grid_notes()), shape_of(&merged));
            (got != want).then(|| ("hold_merge".to_string(), diff(&got, &want)))
        }
        (Representation::Signallike, TensorData::F32(v)) => {
            let samples: Vec<f64> = v[range].iter().map(|&x| f64::from(x)).collect();
            match codec?.decode_steps(&samples, rec.steps, rec.quantum) {
                Ok(roll) if roll == PianoRoll::from_bar(&source) => None,
                Ok(roll) => content(diff(
                    &shape_of(&roll.to_bar().grid_notes()),
                    &shape_of(&PianoRoll::from_bar(&source).to_bar().grid_notes()),
                )),
                Err(e) => content(e.to_string()),
            }
        }
        (Representation::Midilike, TensorData::I32(v)) => {
            let ml = cfg.midilike();
            let decoded = decode_tokens(&v[range], &ml, rec.quantum);
            if !decoded.is_valid() {
                return content(format!("violations {:?}", decoded.violations));
            }
            let mut want: Vec<GridNote> = merged
                .iter()
                .map(|g| GridNote {
                    velocity: ml.bin_velocity(ml.velocity_bin(g.velocity)),
                    ..*g
                })
                .collect();
            want.sort();
            let got = decoded.bar.grid_notes();
            (got != want).then(|| {
                (
                    "content".to_string(),
                    diff(&shape_of(&got), &shape_of(&want)),
                )
            })
        }
        (Representation::MidilikeMono, TensorData::I32(v)) => {
            let tokens: Option<Vec<MonoToken>> =
                v[range].iter().map(|&t| MonoToken::from_token(t)).collect();
            let Some(tokens) = tokens else {
                return content("token outside vocabulary".into());
            };
            let decoded = decode_mono(&tokens, DEFAULT_VELOCITY, rec.quantum);
            let (got, want) = (shape_of(&decoded.bar.grid_notes()), shape_of(&merged));
            (!decoded.is_valid() || got != want).then(|| ("content".to_string(), diff(&got, &want)))
        }
        (Representation::Notetuple, TensorData::I32(v)) => {
            match decode_notetuple(&TupleSequence::from_i32(&v[range]), rec.steps, rec.quantum) {
                Ok((bar, issues)) if issues.is_empty() && bar.grid_notes() == rec.notes => None,
                Ok((bar, issues)) => content(format!(
                    "{} issues; {}",
                    issues.len(),
                    diff(&shape_of(&bar.grid_notes()), &shape_of(&rec.notes))
                )),
                Err(e) => content(e.to_string()),
            }
        }
        _ => content("tensor dtype does not match representation".into()),
    }
}

/// Decodes every row of every tensor in a built dataset and compares it
/// with its source bar in the representation's own domain.
pub fn roundtrip_check(dataset_dir: &Path) -> Result<RoundtripReport, DatasetError> {
    let manifest = read_manifest(dataset_dir)?;
    let cfg = &manifest.config;
    let codec = match cfg.representations.contains(&Representation::Signallike) {
        true => Some(SignalCodec::new(cfg.spectral, PrimeMap::default())?),
        false => None,
    };
    let mut records: BTreeMap<String, Vec<BarRecord>> = BTreeMap::new();
    for split in SPLITS {
        records.insert(
            split.to_string(),
            read_bar_records(&dataset_dir.join(split).join("bars.jsonl"))?,
        );
    }
    let mut reports = Vec::new();
    for &rep in &cfg.representations {
        let mut rows = 0;
        let mut mismatches = Vec::new();
        for info in manifest.tensors.iter().filter(|t| t.representation == rep) {
            let path = dataset_dir.join(&info.file);
            let tensor = Tensor::read(&path)?;
            let recs = &records[&info.split];
            if tensor.dims().first() != Some(&recs.len()) {
                return Err(DatasetError::Format {
                    path,
                    message: format!(
                        "{} rows for {} source bars",
                        tensor.dims().first().unwrap_or(&0),
                        recs.len()
                    ),
                });
            }
            let width = tensor.row_len();
            let found: Vec<Option<Mismatch>> = recs
                .par_iter()
                .enumerate()
                .map(|(row, rec)| {
                    check_row(
                        rep,
                        tensor.data(),
                        row * width..(row + 1) * width,
                        rec,
                        cfg,
                        codec.as_ref(),
                    )
                    .map(|(category, detail)| Mismatch {
                        split: info.split.clone(),
                        row,
                        source: rec.source.clone(),
                        bar_index: rec.bar_index,
                        shift: rec.shift,
                        category,
                        detail,
                    })
                })
                .collect();
            rows += recs.len();
            mismatches.extend(found.into_iter().flatten());
        }
        let exact = rows - mismatches.len();
        reports.push(RepresentationReport {
            representation: rep,
            rows,
            exact,
            rate: if rows == 0 {
                1.0
            } else {
                exact as f64 / rows as f64
            },
            mismatches,
        });
    }
    Ok(RoundtripReport {
        representations: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::midi::write_midi;
    use crate::model::{Note, Score};

    fn write_score(dir: &Path, name: &str, notes: &[(u8, u64, u64)]) {
        let mut score = Score::new(480);
        score.notes = notes
            .iter()
            .map(|&(p, on, d)| Note::new(p, on, d, 90, 0))
            .collect();
        fs::write(dir.join(name), write_midi(&score)).unwrap();
    }

    fn small_cfg(reps: &[Representation]) -> PipelineConfig {
        PipelineConfig {
            representations: reps.to_vec(),
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        let mut c = PipelineConfig {
            split_ratio: 1.0,
            ..PipelineConfig::default()
        };
        assert!(c.validate().is_err());
        c.split_ratio = 0.5;
        c.representations = vec![Representation::Midilike, Representation::Midilike];
        assert!(c.validate().is_err());
        assert_eq!(
            "midilike_mono".parse::<Representation>(),
            Ok(Representation::MidilikeMono)
        );
        assert!("wav".parse::<Representation>().is_err());
    }

    #[test]
    fn single_over_budget_bar_is_empty_dataset() {
        let corpus = tempfile::tempdir().unwrap();
        // 40 sixteenth-note attacks in one bar: 80 note events alone
        let notes: Vec<(u8, u64, u64)> = (0..40)
            .map(|i| (40 + i as u8, (i % 16) * 120, 120))
            .collect();
        write_score(corpus.path(), "dense.mid", &notes);
        let out = tempfile::tempdir().unwrap();
        let err = build_dataset(
            corpus.path(),
            out.path(),
            &small_cfg(&[Representation::Midilike]),
        )
        .unwrap_err();
        assert!(matches!(err, DatasetError::EmptyDataset));
        assert_eq!(
            err.to_string(),
            "empty dataset: no bar survived parsing and filtering"
        );
    }

    #[test]
    fn rearticulation_is_itemised_for_pianoroll_only() {
        let corpus = tempfile::tempdir().unwrap();
        write_score(
            corpus.path(),
            "a.mid",
            &[(60, 0, 480), (60, 480, 480), (64, 960, 960)],
        );
        write_score(corpus.path(), "b.mid", &[(67, 0, 1920)]);
        let out = tempfile::tempdir().unwrap();
        let reps = [
            Representation::Pianoroll,
            Representation::Notetuple,
            Representation::Signallike,
        ];
        let manifest = build_dataset(corpus.path(), out.path(), &small_cfg(&reps)).unwrap();
        assert_eq!(manifest.bars_in, 2);
        assert_eq!(manifest.bars_kept, 2);
        let report = roundtrip_check(out.path()).unwrap();
        let roll = &report.representations[0];
        assert_eq!(roll.exact, 1);
        assert_eq!(roll.mismatches.len(), 1);
        assert_eq!(roll.mismatches[0].category, "hold_merge");
        assert_eq!(roll.mismatches[0].source, "a.mid");
        assert_eq!(report.rate(Representation::Notetuple), Some(1.0));
        assert_eq!(report.rate(Representation::Signallike), Some(1.0));
    }

    #[test]
    fn unreadable_file_is_skipped() {
        let corpus = tempfile::tempdir().unwrap();
        fs::write(corpus.path().join("junk.mid"), b"not midi").unwrap();
        write_score(corpus.path(), "ok.mid", &[(60, 0, 480)]);
        let out = tempfile::tempdir().unwrap();
        let m = build_dataset(
            corpus.path(),
            out.path(),
            &small_cfg(&[Representation::Midilike]),
        )
        .unwrap();
        assert_eq!(m.files_found, 2);
        assert_eq!(m.skipped_files.len(), 1);
        assert_eq!(m.bars_kept, 1);
    }

    #[test]
    fn augmentation_and_accounting() {
        let corpus = tempfile::tempdir().unwrap();
        write_score(corpus.path(), "low.mid", &[(50, 0, 480), (52, 1920, 480)]);
        write_score(corpus.path(), "wide.mid", &[(48, 0, 480), (60, 480, 480)]);
        let out = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig {
            augment: true,
            ..small_cfg(&[Representation::Midilike, Representation::MidilikeMono])
        };
        let m = build_dataset(corpus.path(), out.path(), &cfg).unwrap();
        // corpus range 48..=60; low.mid (50..=52) fits shifts -2..=8, wide.mid only 0
        assert_eq!(m.bars_in, 11 * 2 + 1);
        assert_eq!(m.bars_in, m.bars_kept + m.dropped.values().sum::<usize>());
        assert!(roundtrip_check(out.path()).unwrap().all_exact());
    }
}
