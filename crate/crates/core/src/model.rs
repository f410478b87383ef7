//! Score model, bar slicing, quantization and piano-roll conversion.
//!
//! Ticks are absolute MIDI ticks inside a [`Score`] and bar-relative inside a
//! [`Bar`]. A bar is divided into `steps` columns of `quantum` ticks; every
//! representation in this crate works on that grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of MIDI pitches, and therefore piano-roll rows.
pub const PITCHES: usize = 128;

/// Columns per bar unless configured otherwise (sixteenth notes in 4/4).
pub const DEFAULT_STEPS: usize = 16;

/// Velocity given to notes recovered from representations that do not carry one.
pub const DEFAULT_VELOCITY: u8 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Note {
    pub pitch: u8,
    pub onset: u64,
    pub duration: u64,
    pub velocity: u8,
    pub voice: u8,
}

impl Note {
    pub fn new(pitch: u8, onset: u64, duration: u64, velocity: u8, voice: u8) -> Self {
        Self {
            pitch,
            onset,
            duration,
            velocity,
            voice,
        }
    }

    pub fn end(&self) -> u64 {
        self.onset + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeSignature {
    pub tick: u64,
    pub numerator: u8,
    /// Actual note value (4 for quarter), not the SMF power-of-two exponent.
    pub denominator: u8,
}

impl TimeSignature {
    pub fn bar_ticks(&self, ppq: u16) -> u64 {
        u64::from(ppq) * 4 * u64::from(self.numerator) / u64::from(self.denominator.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TempoEvent {
    pub tick: u64,
    pub micros_per_quarter: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Score {
    pub ppq: u16,
    pub time_signatures: Vec<TimeSignature>,
    pub tempo_events: Vec<TempoEvent>,
    pub notes: Vec<Note>,
}

impl Score {
    /// Empty 4/4 score at the given resolution.
    pub fn new(ppq: u16) -> Self {
        Self {
            ppq,
            time_signatures: vec![TimeSignature {
                tick: 0,
                numerator: 4,
                denominator: 4,
            }],
            tempo_events: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Sorts notes by (onset, voice, pitch, duration, velocity).
    pub fn sort_notes(&mut self) {
        self.notes
            .sort_by_key(|n| (n.onset, n.voice, n.pitch, n.duration, n.velocity));
    }

    pub fn end_tick(&self) -> u64 {
        self.notes.iter().map(Note::end).max().unwrap_or(0)
    }

    pub fn pitch_range(&self) -> Option<(u8, u8)> {
        let min = self.notes.iter().map(|n| n.pitch).min()?;
        let max = self.notes.iter().map(|n| n.pitch).max()?;
        Some((min, max))
    }

    /// Shifts every pitch by `semitones`, failing if any leaves 0..=127.
    pub fn transpose(&self, semitones: i32) -> Result<Score, ModelError> {
        let notes = self
            .notes
            .iter()
            .map(|n| shift_pitch(n.pitch, semitones).map(|pitch| Note { pitch, ..*n }))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Score {
            notes,
            ..self.clone()
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("score has no time signature")]
    NoTimeSignature,
    #[error("first time signature is at tick {0}, expected 0")]
    FirstTimeSignatureNotAtZero(u64),
    #[error("steps per bar must be at least 1")]
    ZeroSteps,
    #[error("ppq must be positive")]
    ZeroPpq,
    #[error("time signature change at tick {tick} falls inside bar {bar} (bar starts at tick {bar_start})")]
    MidBarTimeSignature {
        tick: u64,
        bar: usize,
        bar_start: u64,
    },
    #[error("bar of {bar_ticks} ticks cannot be divided into {steps} equal steps")]
    NonIntegralQuantum { bar_ticks: u64, steps: usize },
    #[error("invalid time signature {numerator}/{denominator} at tick {tick}")]
    InvalidTimeSignature {
        tick: u64,
        numerator: u8,
        denominator: u8,
    },
    #[error("pitch {pitch} transposed by {semitones} leaves the MIDI range")]
    PitchOutOfRange { pitch: u8, semitones: i32 },
}

fn shift_pitch(pitch: u8, semitones: i32) -> Result<u8, ModelError> {
    let shifted = i32::from(pitch) + semitones;
    if (0..PITCHES as i32).contains(&shifted) {
        Ok(shifted as u8)
    } else {
        Err(ModelError::PitchOutOfRange { pitch, semitones })
    }
}

/// A note snapped to the column grid of a bar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridNote {
    pub start: usize,
    pub len: usize,
    pub pitch: u8,
    pub velocity: u8,
}

impl GridNote {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bar {
    pub index: usize,
    pub quantum: u64,
    pub steps: usize,
    pub notes: Vec<Note>,
}

impl Bar {
    pub fn empty(index: usize, quantum: u64, steps: usize) -> Self {
        Self {
            index,
            quantum,
            steps,
            notes: Vec::new(),
        }
    }

    pub fn ticks(&self) -> u64 {
        self.quantum * self.steps as u64
    }

    /// Builds a bar from grid notes; onsets and durations become multiples of `quantum`.
    pub fn from_grid(index: usize, quantum: u64, steps: usize, notes: &[GridNote]) -> Self {
        let mut bar = Self::empty(index, quantum, steps);
        bar.notes = notes
            .iter()
            .map(|g| {
                Note::new(
                    g.pitch,
                    g.start as u64 * quantum,
                    g.len as u64 * quantum,
                    g.velocity,
                    0,
                )
            })
            .collect();
        bar
    }

    /// Notes snapped to the grid, sorted by (start, len, pitch, velocity).
    ///
    /// Onset and offset round half up to the nearest column; a note always
    /// keeps at least one column and never starts at or beyond the last column
    /// boundary.
    pub fn grid_notes(&self) -> Vec<GridNote> {
        let mut out: Vec<GridNote> = self
            .notes
            .iter()
            .filter_map(|n| {
                if self.steps == 0 {
                    return None;
                }
                let start = snap(n.onset, self.quantum).min(self.steps - 1);
                let end = snap(n.end(), self.quantum).min(self.steps);
                let end = end.max(start + 1);
                Some(GridNote {
                    start,
                    len: end - start,
                    pitch: n.pitch,
                    velocity: n.velocity,
                })
            })
            .collect();
        out.sort();
        out
    }

    /// Grid notes with strictly overlapping same-pitch notes merged into their union.
    ///
    /// Touching notes (one ends where the next starts) stay separate.
    pub fn merged_grid_notes(&self) -> Vec<GridNote> {
        let mut notes = self.grid_notes();
        notes.sort_by_key(|g| (g.pitch, g.start, g.len));
        let mut merged: Vec<GridNote> = Vec::with_capacity(notes.len());
        for g in notes {
            match merged.last_mut() {
                Some(last) if last.pitch == g.pitch && g.start < last.end() => {
                    let end = last.end().max(g.end());
                    last.len = end - last.start;
                }
                _ => merged.push(g),
            }
        }
        merged.sort();
        merged
    }

    /// Whether at most one pitch sounds in every column.
    pub fn is_monophonic(&self) -> bool {
        PianoRoll::from_bar(self)
            .columns()
            .iter()
            .all(|c| c.count_ones() <= 1)
    }
}

fn snap(tick: u64, quantum: u64) -> usize {
    ((tick + quantum / 2) / quantum.max(1)) as usize
}

/// Binary 128 x T activation matrix. Bit `p` of column `t` marks pitch `p` sounding.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PianoRoll {
    quantum: u64,
    columns: Vec<u128>,
}

impl PianoRoll {
    pub fn new(steps: usize, quantum: u64) -> Self {
        Self {
            quantum,
            columns: vec![0; steps],
        }
    }

    pub fn from_columns(columns: Vec<u128>, quantum: u64) -> Self {
        Self { quantum, columns }
    }

    /// Marks every (pitch, column) cell that some note of the bar sounds in.
    pub fn from_bar(bar: &Bar) -> Self {
        let mut roll = Self::new(bar.steps, bar.quantum);
        for g in bar.grid_notes() {
            for t in g.start..g.end() {
                roll.set(g.pitch, t, true);
            }
        }
        roll
    }

    pub fn steps(&self) -> usize {
        self.columns.len()
    }

    pub fn quantum(&self) -> u64 {
        self.quantum
    }

    pub fn columns(&self) -> &[u128] {
        &self.columns
    }

    pub fn get(&self, pitch: u8, step: usize) -> bool {
        self.columns[step] >> pitch & 1 == 1
    }

    pub fn set(&mut self, pitch: u8, step: usize, on: bool) {
        let bit = 1u128 << pitch;
        if on {
            self.columns[step] |= bit;
        } else {
            self.columns[step] &= !bit;
        }
    }

    pub fn active_cells(&self) -> usize {
        self.columns.iter().map(|c| c.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.iter().all(|&c| c == 0)
    }

    /// Cell-wise OR. Panics if the step counts differ.
    pub fn union(&self, other: &PianoRoll) -> PianoRoll {
        assert_eq!(self.steps(), other.steps(), "piano-roll step counts differ");
        let columns = self
            .columns
            .iter()
            .zip(&other.columns)
            .map(|(a, b)| a | b)
            .collect();
        PianoRoll {
            quantum: self.quantum,
            columns,
        }
    }

    /// Maximal runs of 1s in each row become notes.
    pub fn to_bar(&self) -> Bar {
        let steps = self.steps();
        let mut notes = Vec::new();
        for pitch in 0..PITCHES as u8 {
            let mut t = 0;
            while t < steps {
                if self.get(pitch, t) {
                    let start = t;
                    while t < steps && self.get(pitch, t) {
                        t += 1;
                    }
                    notes.push(GridNote {
                        start,
                        len: t - start,
                        pitch,
                        velocity: DEFAULT_VELOCITY,
                    });
                } else {
                    t += 1;
                }
            }
        }
        notes.sort();
        Bar::from_grid(0, self.quantum, steps, &notes)
    }

    /// Row-major (pitch, step) values as 0.0 / 1.0.
    pub fn to_f32(&self) -> Vec<f32> {
        let mut out = Vec::with_capacity(PITCHES * self.steps());
        for pitch in 0..PITCHES as u8 {
            for t in 0..self.steps() {
                out.push(if self.get(pitch, t) { 1.0 } else { 0.0 });
            }
        }
        out
    }

    /// Inverse of [`PianoRoll::to_f32`]; values above 0.5 count as active.
    pub fn from_f32(values: &[f32], steps: usize, quantum: u64) -> Option<Self> {
        if values.len() != PITCHES * steps {
            return None;
        }
        let mut roll = Self::new(steps, quantum);
        for pitch in 0..PITCHES {
            for t in 0..steps {
                if values[pitch * steps + t] > 0.5 {
                    roll.set(pitch as u8, t, true);
                }
            }
        }
        Some(roll)
    }
}

pub fn bar_to_pianoroll(bar: &Bar) -> PianoRoll {
    PianoRoll::from_bar(bar)
}

pub fn pianoroll_to_bar(roll: &PianoRoll) -> Bar {
    roll.to_bar()
}

/// Shifts every pitch of the bar by `semitones`; rhythm is unchanged.
pub fn transpose_bar(bar: &Bar, semitones: i32) -> Result<Bar, ModelError> {
    let notes = bar
        .notes
        .iter()
        .map(|n| shift_pitch(n.pitch, semitones).map(|pitch| Note { pitch, ..*n }))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Bar {
        notes,
        ..bar.clone()
    })
}

/// Transpositions that keep a piece inside the corpus' observed pitch range.
pub fn augmentation_shifts(piece: (u8, u8), corpus: (u8, u8)) -> std::ops::RangeInclusive<i32> {
    let lo = i32::from(corpus.0) - i32::from(piece.0);
    let hi = i32::from(corpus.1) - i32::from(piece.1);
    lo..=hi
}

/// Splits a score into bars of `steps_per_bar` columns each.
///
/// Notes crossing a barline are cut into one segment per bar. Time signature
/// changes are only accepted on bar boundaries.
pub fn slice_into_bars(score: &Score, steps_per_bar: usize) -> Result<Vec<Bar>, ModelError> {
    if steps_per_bar == 0 {
        return Err(ModelError::ZeroSteps);
    }
    if score.ppq == 0 {
        return Err(ModelError::ZeroPpq);
    }
    let first = score
        .time_signatures
        .first()
        .ok_or(ModelError::NoTimeSignature)?;
    if first.tick != 0 {
        return Err(ModelError::FirstTimeSignatureNotAtZero(first.tick));
    }
    for ts in &score.time_signatures {
        if ts.numerator == 0 || ts.denominator == 0 || ts.bar_ticks(score.ppq) == 0 {
            return Err(ModelError::InvalidTimeSignature {
                tick: ts.tick,
                numerator: ts.numerator,
                denominator: ts.denominator,
            });
        }
    }
    let end = score.end_tick();
    if end == 0 {
        return Ok(Vec::new());
    }

    // Bar boundaries: (start tick, length in ticks).
    let mut spans: Vec<(u64, u64)> = Vec::new();
    let mut sig_idx = 0;
    let mut start = 0u64;
    while start < end {
        while sig_idx + 1 < score.time_signatures.len()
            && score.time_signatures[sig_idx + 1].tick <= start
        {
            sig_idx += 1;
        }
        let ts = score.time_signatures[sig_idx];
        let len = ts.bar_ticks(score.ppq);
        if let Some(next) = score.time_signatures.get(sig_idx + 1) {
            if next.tick > start && next.tick < start + len {
                return Err(ModelError::MidBarTimeSignature {
                    tick: next.tick,
                    bar: spans.len(),
                    bar_start: start,
                });
            }
        }
        if !len.is_multiple_of(steps_per_bar as u64) {
            return Err(ModelError::NonIntegralQuantum {
                bar_ticks: len,
                steps: steps_per_bar,
            });
        }
        spans.push((start, len));
        start += len;
    }

    let mut bars: Vec<Bar> = spans
        .iter()
        .enumerate()
        .map(|(i, &(_, len))| Bar::empty(i, len / steps_per_bar as u64, steps_per_bar))
        .collect();
    for note in &score.notes {
        let first_bar = spans.partition_point(|&(s, l)| s + l <= note.onset);
        for (i, &(s, l)) in spans.iter().enumerate().skip(first_bar) {
            if s >= note.end() {
                break;
            }
            let seg_start = note.onset.max(s);
            let seg_end = note.end().min(s + l);
            if seg_end > seg_start {
                bars[i].notes.push(Note {
                    onset: seg_start - s,
                    duration: seg_end - seg_start,
                    ..*note
                });
            }
        }
    }
    for bar in &mut bars {
        bar.notes
            .sort_by_key(|n| (n.onset, n.voice, n.pitch, n.duration));
    }
    Ok(bars)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn quarter_score(n: u64) -> Score {
        let mut s = Score::new(480);
        s.notes = (0..n)
            .map(|i| Note::new(60, i * 480, 480, 100, 0))
            .collect();
        s
    }

    #[test]
    fn eight_quarters_make_two_bars() {
        let bars = slice_into_bars(&quarter_score(8), 16).unwrap();
        assert_eq!(bars.len(), 2);
        for (i, bar) in bars.iter().enumerate() {
            assert_eq!(bar.index, i);
            assert_eq!(bar.quantum, 120);
            assert_eq!(bar.steps, 16);
            assert_eq!(bar.notes.len(), 4);
        }
    }

    #[test]
    fn empty_score_has_no_bars() {
        assert!(slice_into_bars(&Score::new(480), 16).unwrap().is_empty());
    }

    #[test]
    fn note_spanning_two_bars_is_split() {
        let mut s = Score::new(480);
        s.notes.push(Note::new(67, 0, 2 * 1920, 90, 1));
        let bars = slice_into_bars(&s, 16).unwrap();
        // tick-enumeration oracle: which bar does every sounding tick fall in
        let mut per_bar = [0u64; 2];
        for tick in 0..2 * 1920u64 {
            per_bar[(tick / 1920) as usize] += 1;
        }
        assert_eq!(bars.len(), 2);
        for (bar, expected) in bars.iter().zip(per_bar) {
            assert_eq!(bar.notes, vec![Note::new(67, 0, expected, 90, 1)]);
        }
    }

    #[test]
    fn mid_bar_time_signature_rejected() {
        let mut s = quarter_score(8);
        s.time_signatures.push(TimeSignature {
            tick: 960,
            numerator: 3,
            denominator: 4,
        });
        assert!(matches!(
            slice_into_bars(&s, 16),
            Err(ModelError::MidBarTimeSignature { tick: 960, .. })
        ));
    }

    #[test]
    fn meter_change_on_barline() {
        let mut s = quarter_score(7);
        s.time_signatures.push(TimeSignature {
            tick: 1920,
            numerator: 3,
            denominator: 4,
        });
        let bars = slice_into_bars(&s, 16).unwrap();
        assert_eq!(bars.len(), 2);
        assert_eq!(bars[1].quantum, 90);
        assert_eq!(bars[1].notes.len(), 3);
    }

    #[test]
    fn missing_time_signature() {
        let mut s = quarter_score(1);
        s.time_signatures.clear();
        assert_eq!(slice_into_bars(&s, 16), Err(ModelError::NoTimeSignature));
    }

    #[test]
    fn quarter_note_fills_four_columns() {
        let mut bar = Bar::empty(0, 120, 16);
        bar.notes.push(Note::new(60, 0, 480, 100, 0));
        let roll = bar_to_pianoroll(&bar);
        for t in 0..16 {
            assert_eq!(roll.get(60, t), t < 4);
        }
        assert_eq!(roll.active_cells(), 4);
    }

    #[test]
    fn empty_bar_is_zero_roll() {
        assert!(bar_to_pianoroll(&Bar::empty(0, 120, 16)).is_empty());
    }

    #[test]
    fn overlapping_voices_take_union() {
        let mut bar = Bar::empty(0, 120, 16);
        bar.notes.push(Note::new(64, 0, 600, 100, 0));
        bar.notes.push(Note::new(64, 480, 720, 100, 1));
        let expected: HashSet<usize> = (0..5).chain(4..10).collect();
        let roll = bar_to_pianoroll(&bar);
        for t in 0..16 {
            assert_eq!(roll.get(64, t), expected.contains(&t));
        }
    }

    #[test]
    fn short_note_keeps_one_column() {
        let mut bar = Bar::empty(0, 120, 16);
        bar.notes.push(Note::new(60, 250, 10, 100, 0));
        let roll = bar_to_pianoroll(&bar);
        assert!(roll.get(60, 2));
        assert_eq!(roll.active_cells(), 1);
    }

    #[test]
    fn snapping_rounds_half_up() {
        let mut bar = Bar::empty(0, 120, 16);
        bar.notes.push(Note::new(60, 60, 120, 100, 0));
        assert_eq!(bar.grid_notes()[0].start, 1);
        assert_eq!(bar.grid_notes()[0].len, 1);
    }

    #[test]
    fn runs_become_notes() {
        let mut roll = PianoRoll::new(16, 120);
        for t in 0..4 {
            roll.set(60, t, true);
        }
        let bar = pianoroll_to_bar(&roll);
        assert_eq!(bar.notes, vec![Note::new(60, 0, 480, DEFAULT_VELOCITY, 0)]);
        assert!(pianoroll_to_bar(&PianoRoll::new(16, 120)).notes.is_empty());

        let mut split = PianoRoll::new(16, 120);
        for t in [0, 1, 3, 4] {
            split.set(62, t, true);
        }
        // run-length oracle
        let runs: Vec<(usize, usize)> = {
            let row: Vec<bool> = (0..16).map(|t| split.get(62, t)).collect();
            let mut runs = Vec::new();
            let mut t = 0;
            while t < 16 {
                if row[t] {
                    let s = t;
                    while t < 16 && row[t] {
                        t += 1;
                    }
                    runs.push((s, t - s));
                } else {
                    t += 1;
                }
            }
            runs
        };
        let got: Vec<(usize, usize)> = pianoroll_to_bar(&split)
            .grid_notes()
            .iter()
            .map(|g| (g.start, g.len))
            .collect();
        assert_eq!(got, runs);
        assert_eq!(got.len(), 2);
    }

    #[test]
    fn transposition() {
        let mut bar = Bar::empty(0, 120, 16);
        bar.notes.push(Note::new(60, 0, 480, 100, 0));
        assert_eq!(transpose_bar(&bar, 2).unwrap().notes[0].pitch, 62);
        assert_eq!(transpose_bar(&bar, 0).unwrap(), bar);
        let mut top = bar.clone();
        top.notes[0].pitch = 127;
        assert!(matches!(
            transpose_bar(&top, 1),
            Err(ModelError::PitchOutOfRange { .. })
        ));
    }

    #[test]
    fn augmentation_range() {
        assert_eq!(augmentation_shifts((50, 70), (40, 80)), -10..=10);
        assert!(augmentation_shifts((40, 80), (40, 80)).eq(0..=0));
    }

    fn arb_roll() -> impl Strategy<Value = PianoRoll> {
        proptest::collection::vec(any::<u128>(), 16).prop_map(|c| PianoRoll::from_columns(c, 120))
    }

    fn arb_score() -> impl Strategy<Value = Score> {
        proptest::collection::vec((30u8..90, 0u64..4000, 1u64..3000, 0u8..4), 0..40).prop_map(
            |notes| {
                let mut s = Score::new(96);
                s.notes = notes
                    .into_iter()
                    .map(|(p, o, d, v)| Note::new(p, o, d, 100, v))
                    .collect();
                s
            },
        )
    }

    fn sounding_cells(notes: impl Iterator<Item = (u8, u64, u64)>) -> HashSet<(u8, u64)> {
        let mut cells = HashSet::new();
        for (pitch, start, end) in notes {
            for t in start..end {
                cells.insert((pitch, t));
            }
        }
        cells
    }

    proptest! {
        #[test]
        fn roll_round_trip(roll in arb_roll()) {
            prop_assert_eq!(bar_to_pianoroll(&pianoroll_to_bar(&roll)), roll);
        }

        #[test]
        fn transposition_inverts(notes in proptest::collection::vec((0u8..128, 0u64..16), 0..10), k in -20i32..20) {
            let mut bar = Bar::empty(0, 120, 16);
            bar.notes = notes.into_iter().map(|(p, s)| Note::new(p, s * 120, 120, 100, 0)).collect();
            if let Ok(up) = transpose_bar(&bar, k) {
                if let Ok(back) = transpose_bar(&up, -k) {
                    prop_assert_eq!(back, bar);
                }
            }
        }

        #[test]
        fn slicing_conserves_sounding_time(score in arb_score()) {
            let before = sounding_cells(score.notes.iter().map(|n| (n.pitch, n.onset, n.end())));
            let bars = slice_into_bars(&score, 16).unwrap();
            let bar_ticks = 4 * 96u64;
            let after = sounding_cells(bars.iter().flat_map(|b| {
                let base = b.index as u64 * bar_ticks;
                b.notes.iter().map(move |n| (n.pitch, base + n.onset, base + n.end()))
            }));
            prop_assert_eq!(before, after);
            for b in &bars {
                for n in &b.notes {
                    prop_assert!(n.end() <= b.ticks());
                }
            }
        }
    }
}
