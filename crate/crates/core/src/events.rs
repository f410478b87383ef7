//! MIDI-like event sequences and the monophonic per-column token stream.
//!
//! Token vocabulary for the polyphonic stream (with `steps` = T):
//!
//! | event              | token                |
//! |--------------------|----------------------|
//! | `PAD`              | 0                    |
//! | `NOTE_ON(p)`       | 1 + p                |
//! | `NOTE_OFF(p)`      | 129 + p              |
//! | `TIME_SHIFT(s)`    | 257 + (s - 1)        |
//! | `SET_VELOCITY(b)`  | 257 + T + b          |
//!
//! With T = 16 velocity tokens start at 273.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Bar, GridNote, DEFAULT_STEPS, DEFAULT_VELOCITY, PITCHES};

pub const DEFAULT_MAX_EVENTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MusicEvent {
    NoteOn(u8),
    NoteOff(u8),
    TimeShift(u8),
    SetVelocity(u8),
    Pad,
}

impl MusicEvent {
    pub fn token(self, steps: usize) -> i32 {
        match self {
            MusicEvent::Pad => 0,
            MusicEvent::NoteOn(p) => 1 + i32::from(p),
            MusicEvent::NoteOff(p) => 129 + i32::from(p),
            MusicEvent::TimeShift(s) => 257 + i32::from(s) - 1,
            MusicEvent::SetVelocity(b) => 257 + steps as i32 + i32::from(b),
        }
    }

    pub fn from_token(token: i32, steps: usize, velocity_bins: usize) -> Option<Self> {
        let vel_base = 257 + steps as i32;
        match token {
            0 => Some(MusicEvent::Pad),
            1..=128 => Some(MusicEvent::NoteOn((token - 1) as u8)),
            129..=256 => Some(MusicEvent::NoteOff((token - 129) as u8)),
            t if t >= 257 && t < vel_base => Some(MusicEvent::TimeShift((t - 256) as u8)),
            t if t >= vel_base && t < vel_base + velocity_bins as i32 => {
                Some(MusicEvent::SetVelocity((t - vel_base) as u8))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MidiLikeConfig {
    pub steps: usize,
    pub max_events: usize,
    /// 1 means flat velocity: no `SET_VELOCITY` events are emitted.
    pub velocity_bins: usize,
    pub default_velocity: u8,
}

impl Default for MidiLikeConfig {
    fn default() -> Self {
        Self {
            steps: DEFAULT_STEPS,
            max_events: DEFAULT_MAX_EVENTS,
            velocity_bins: 1,
            default_velocity: DEFAULT_VELOCITY,
        }
    }
}

impl MidiLikeConfig {
    pub fn vocab_size(&self) -> usize {
        257 + self.steps + self.velocity_bins
    }

    pub fn velocity_bin(&self, velocity: u8) -> u8 {
        (usize::from(velocity.min(127)) * self.velocity_bins / 128) as u8
    }

    /// Velocity a bin decodes to: the centre of its range.
    pub fn bin_velocity(&self, bin: u8) -> u8 {
        if self.velocity_bins <= 1 {
            return self.default_velocity;
        }
        let width = 128 / self.velocity_bins;
        (usize::from(bin) * width + width / 2).min(127) as u8
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventSequence {
    pub events: Vec<MusicEvent>,
    pub true_length: usize,
}

impl EventSequence {
    pub fn tokens(&self, steps: usize) -> Vec<i32> {
        self.events.iter().map(|e| e.token(steps)).collect()
    }

    /// Rebuilds a sequence from tokens, failing with the index of the first
    /// token outside the vocabulary.
    pub fn from_tokens(tokens: &[i32], cfg: &MidiLikeConfig) -> Result<Self, usize> {
        let events = tokens
            .iter()
            .enumerate()
            .map(|(i, &t)| MusicEvent::from_token(t, cfg.steps, cfg.velocity_bins).ok_or(i))
            .collect::<Result<Vec<_>, _>>()?;
        let true_length = events.iter().filter(|e| **e != MusicEvent::Pad).count();
        Ok(Self {
            events,
            true_length,
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EventError {
    #[error("bar needs {needed} events, budget is {budget}")]
    OverBudget { needed: usize, budget: usize },
    #[error("bar has {actual} steps, codec expects {expected}")]
    StepMismatch { expected: usize, actual: usize },
    #[error("bar is not monophonic at column {column}")]
    NotMonophonic { column: usize },
}

/// Violations found while decoding; none of them is silently repaired.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// `NOTE_OFF` for a pitch that is not sounding: a note that never started.
    UnmatchedNoteOff { index: usize, pitch: u8 },
    /// Note still sounding when the sequence ends: a note that never ended.
    UnterminatedNote { pitch: u8, start: usize },
    /// Time shifts run past the end of the bar.
    TimeOverflow { index: usize, time: usize },
    /// `NOTE_ON` for a pitch that is already sounding.
    DuplicateNoteOn { index: usize, pitch: u8 },
    /// `NOTE_ON` and `NOTE_OFF` at the same time.
    ZeroLengthNote { index: usize, pitch: u8 },
    /// Time shifts sum to less than the bar length.
    ShortTimeline { time: usize },
    /// `HOLD` with nothing to hold (monophonic stream only).
    OrphanHold { column: usize },
    /// Token outside the vocabulary.
    UnknownToken { index: usize, token: i32 },
}

fn check_steps(bar: &Bar, steps: usize) -> Result<(), EventError> {
    if bar.steps != steps {
        return Err(EventError::StepMismatch {
            expected: steps,
            actual: bar.steps,
        });
    }
    Ok(())
}

/// Encodes a bar as a padded event sequence.
///
/// At equal times all `NOTE_OFF`s come first, then `NOTE_ON`s grouped by
/// velocity bin (each group preceded by its `SET_VELOCITY` when the bin
/// changes), pitch ascending within each group. Strictly overlapping notes of
/// one pitch are merged before encoding.
pub fn encode_midilike(bar: &Bar, cfg: &MidiLikeConfig) -> Result<EventSequence, EventError> {
    check_steps(bar, cfg.steps)?;
    let notes = bar.merged_grid_notes();
    let mut ons: BTreeMap<usize, Vec<(u8, u8)>> = BTreeMap::new();
    let mut offs: BTreeMap<usize, Vec<u8>> = BTreeMap::new();
    for g in &notes {
        ons.entry(g.start)
            .or_default()
            .push((cfg.velocity_bin(g.velocity), g.pitch));
        offs.entry(g.end()).or_default().push(g.pitch);
    }
    let mut times: Vec<usize> = ons.keys().chain(offs.keys()).copied().collect();
    times.sort_unstable();
    times.dedup();

    let mut events = Vec::new();
    let mut now = 0;
    let mut current_bin: Option<u8> = None;
    for t in times {
        if t > now {
            events.push(MusicEvent::TimeShift((t - now) as u8));
            now = t;
        }
        if let Some(pitches) = offs.get_mut(&t) {
            pitches.sort_unstable();
            events.extend(pitches.iter().map(|&p| MusicEvent::NoteOff(p)));
        }
        if let Some(group) = ons.get_mut(&t) {
            group.sort_unstable();
            for &(bin, pitch) in group.iter() {
                if cfg.velocity_bins > 1 && current_bin != Some(bin) {
                    events.push(MusicEvent::SetVelocity(bin));
                    current_bin = Some(bin);
                }
                events.push(MusicEvent::NoteOn(pitch));
            }
        }
    }
    if now < cfg.steps {
        events.push(MusicEvent::TimeShift((cfg.steps - now) as u8));
    }
    let true_length = events.len();
    if true_length > cfg.max_events {
        return Err(EventError::OverBudget {
            needed: true_length,
            budget: cfg.max_events,
        });
    }
    events.resize(cfg.max_events, MusicEvent::Pad);
    Ok(EventSequence {
        events,
        true_length,
    })
}

/// Number of events a bar needs, without the budget check.
pub fn event_count(bar: &Bar, cfg: &MidiLikeConfig) -> Result<usize, EventError> {
    check_steps(bar, cfg.steps)?;
    let notes = bar.merged_grid_notes();
    let mut times: Vec<usize> = notes.iter().flat_map(|g| [g.start, g.end()]).collect();
    times.sort_unstable();
    times.dedup();
    let shifts = times.iter().filter(|&&t| t > 0).count()
        + usize::from(times.last().is_none_or(|&t| t < cfg.steps));
    let mut velocity_events = 0;
    if cfg.velocity_bins > 1 {
        let mut by_time: BTreeMap<usize, Vec<u8>> = BTreeMap::new();
        for g in &notes {
            by_time
                .entry(g.start)
                .or_default()
                .push(cfg.velocity_bin(g.velocity));
        }
        let mut current = None;
        for bins in by_time.values_mut() {
            bins.sort_unstable();
            bins.dedup();
            for &b in bins.iter() {
                if current != Some(b) {
                    velocity_events += 1;
                    current = Some(b);
                }
            }
        }
    }
    Ok(2 * notes.len() + shifts + velocity_events)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub bar: Bar,
    pub violations: Vec<Violation>,
}

impl Decoded {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Decodes an event sequence into a bar plus every validity violation found.
pub fn decode_midilike(seq: &EventSequence, cfg: &MidiLikeConfig, quantum: u64) -> Decoded {
    let steps = cfg.steps;
    let mut violations = Vec::new();
    let mut open: [Option<(usize, u8)>; PITCHES] = [None; PITCHES];
    let mut notes = Vec::new();
    let mut time = 0usize;
    let mut velocity = cfg.bin_velocity(0);
    for (index, &ev) in seq.events.iter().enumerate() {
        match ev {
            MusicEvent::Pad => {}
            MusicEvent::TimeShift(s) => {
                time += usize::from(s);
                if time > steps {
                    violations.push(Violation::TimeOverflow { index, time });
                    time = steps;
                }
            }
            MusicEvent::SetVelocity(b) => velocity = cfg.bin_velocity(b),
            MusicEvent::NoteOn(p) => {
                let slot = &mut open[usize::from(p & 0x7f)];
                if slot.is_some() {
                    violations.push(Violation::DuplicateNoteOn { index, pitch: p });
                } else {
                    *slot = Some((time, velocity));
                }
            }
            MusicEvent::NoteOff(p) => match open[usize::from(p & 0x7f)].take() {
                None => violations.push(Violation::UnmatchedNoteOff { index, pitch: p }),
                Some((start, _)) if start == time => {
                    violations.push(Violation::ZeroLengthNote { index, pitch: p })
                }
                Some((start, vel)) => notes.push(GridNote {
                    start,
                    len: time - start,
                    pitch: p,
                    velocity: vel,
                }),
            },
        }
    }
    for (pitch, slot) in open.iter().enumerate() {
        if let Some((start, _)) = slot {
            violations.push(Violation::UnterminatedNote {
                pitch: pitch as u8,
                start: *start,
            });
        }
    }
    if time < steps {
        violations.push(Violation::ShortTimeline { time });
    }
    notes.sort();
    Decoded {
        bar: Bar::from_grid(0, quantum, steps, &notes),
        violations,
    }
}

/// Decodes raw tokens; tokens outside the vocabulary are reported and skipped.
pub fn decode_tokens(tokens: &[i32], cfg: &MidiLikeConfig, quantum: u64) -> Decoded {
    let mut unknown = Vec::new();
    let events = tokens
        .iter()
        .enumerate()
        .map(|(index, &token)| {
            MusicEvent::from_token(token, cfg.steps, cfg.velocity_bins).unwrap_or_else(|| {
                unknown.push(Violation::UnknownToken { index, token });
                MusicEvent::Pad
            })
        })
        .collect::<Vec<_>>();
    let true_length = events.iter().filter(|e| **e != MusicEvent::Pad).count();
    let mut decoded = decode_midilike(
        &EventSequence {
            events,
            true_length,
        },
        cfg,
        quantum,
    );
    unknown.append(&mut decoded.violations);
    decoded.violations = unknown;
    decoded
}

/// Per-column tokens of the monophonic stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MonoToken {
    Rest,
    Hold,
    Note(u8),
}

impl MonoToken {
    /// `REST` = 0, `HOLD` = 1, `NOTE(p)` = 2 + p.
    pub fn token(self) -> i32 {
        match self {
            MonoToken::Rest => 0,
            MonoToken::Hold => 1,
            MonoToken::Note(p) => 2 + i32::from(p),
        }
    }

    pub fn from_token(token: i32) -> Option<Self> {
        match token {
            0 => Some(MonoToken::Rest),
            1 => Some(MonoToken::Hold),
            2..=129 => Some(MonoToken::Note((token - 2) as u8)),
            _ => None,
        }
    }
}

pub fn encode_mono(bar: &Bar, steps: usize) -> Result<Vec<MonoToken>, EventError> {
    check_steps(bar, steps)?;
    let mut tokens = vec![MonoToken::Rest; steps];
    let mut owner: Vec<Option<u8>> = vec![None; steps];
    for g in bar.merged_grid_notes() {
        for t in g.start..g.end() {
            match owner[t] {
                Some(p) if p != g.pitch => return Err(EventError::NotMonophonic { column: t }),
                _ => owner[t] = Some(g.pitch),
            }
            tokens[t] = if t == g.start {
                MonoToken::Note(g.pitch)
            } else {
                MonoToken::Hold
            };
        }
    }
    Ok(tokens)
}

pub fn decode_mono(tokens: &[MonoToken], velocity: u8, quantum: u64) -> Decoded {
    let mut notes: Vec<GridNote> = Vec::new();
    let mut violations = Vec::new();
    let mut sounding = false;
    for (t, tok) in tokens.iter().enumerate() {
        match tok {
            MonoToken::Note(p) => {
                notes.push(GridNote {
                    start: t,
                    len: 1,
                    pitch: *p,
                    velocity,
                });
                sounding = true;
            }
            MonoToken::Hold if sounding => {
                if let Some(last) = notes.last_mut() {
                    last.len += 1;
                }
            }
            MonoToken::Hold => violations.push(Violation::OrphanHold { column: t }),
            MonoToken::Rest => sounding = false,
        }
    }
    Decoded {
        bar: Bar::from_grid(0, quantum, tokens.len(), &notes),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Note;
    use MusicEvent::*;

    fn bar(notes: &[(u8, usize, usize)]) -> Bar {
        let grid: Vec<GridNote> = notes
            .iter()
            .map(|&(pitch, start, len)| GridNote {
                start,
                len,
                pitch,
                velocity: DEFAULT_VELOCITY,
            })
            .collect();
        Bar::from_grid(0, 120, 16, &grid)
    }

    fn padded(mut events: Vec<MusicEvent>) -> EventSequence {
        let true_length = events.len();
        events.resize(64, Pad);
        EventSequence {
            events,
            true_length,
        }
    }

    #[test]
    fn empty_bar_is_one_shift() {
        let cfg = MidiLikeConfig::default();
        let seq = encode_midilike(&bar(&[]), &cfg).unwrap();
        assert_eq!(seq, padded(vec![TimeShift(16)]));
        assert_eq!(seq.events.len(), 64);
    }

    #[test]
    fn single_quarter_note() {
        let cfg = MidiLikeConfig::default();
        let seq = encode_midilike(&bar(&[(60, 0, 4)]), &cfg).unwrap();
        assert_eq!(
            seq,
            padded(vec![NoteOn(60), TimeShift(4), NoteOff(60), TimeShift(12)])
        );
        assert_eq!(seq.tokens(16)[..4], [61, 257 + 3, 129 + 60, 257 + 11]);
    }

    #[test]
    fn dense_bar_over_budget() {
        // 4 voices of sixteenth notes: event-count oracle is
        // 64 ons + 64 offs + 16 shifts = 144 > 64
        let notes: Vec<(u8, usize, usize)> = (0..16)
            .flat_map(|t| [(48, t, 1), (55, t, 1), (64, t, 1), (72, t, 1)])
            .collect();
        let b = bar(&notes);
        let expected = 2 * notes.len() + 16;
        let cfg = MidiLikeConfig::default();
        assert_eq!(event_count(&b, &cfg).unwrap(), expected);
        assert_eq!(
            encode_midilike(&b, &cfg),
            Err(EventError::OverBudget {
                needed: expected,
                budget: 64
            })
        );
    }

    #[test]
    fn same_tick_order_is_off_then_on() {
        let cfg = MidiLikeConfig::default();
        let seq = encode_midilike(&bar(&[(64, 0, 4), (60, 0, 4), (60, 4, 4)]), &cfg).unwrap();
        assert_eq!(
            seq.events[..8],
            [
                NoteOn(60),
                NoteOn(64),
                TimeShift(4),
                NoteOff(60),
                NoteOff(64),
                NoteOn(60),
                TimeShift(4),
                NoteOff(60)
            ]
        );
    }

    #[test]
    fn velocity_groups() {
        let cfg = MidiLikeConfig {
            velocity_bins: 32,
            ..Default::default()
        };
        let mut b = bar(&[(60, 0, 2), (64, 0, 2), (67, 2, 2)]);
        b.notes[0].velocity = cfg.bin_velocity(20);
        b.notes[1].velocity = cfg.bin_velocity(10);
        b.notes[2].velocity = cfg.bin_velocity(10);
        let seq = encode_midilike(&b, &cfg).unwrap();
        assert_eq!(
            seq.events[..8],
            [
                SetVelocity(10),
                NoteOn(64),
                SetVelocity(20),
                NoteOn(60),
                TimeShift(2),
                NoteOff(60),
                NoteOff(64),
                SetVelocity(10)
            ]
        );
        assert_eq!(event_count(&b, &cfg).unwrap(), seq.true_length);
        let dec = decode_midilike(&seq, &cfg, 120);
        assert!(dec.is_valid());
        assert_eq!(dec.bar.grid_notes(), b.grid_notes());
    }

    #[test]
    fn never_ended_note() {
        let cfg = MidiLikeConfig::default();
        let dec = decode_midilike(&padded(vec![NoteOn(60), TimeShift(16)]), &cfg, 120);
        assert_eq!(
            dec.violations,
            vec![Violation::UnterminatedNote {
                pitch: 60,
                start: 0
            }]
        );
    }

    #[test]
    fn never_started_note() {
        let cfg = MidiLikeConfig::default();
        let dec = decode_midilike(&padded(vec![NoteOff(60), TimeShift(16)]), &cfg, 120);
        assert_eq!(
            dec.violations,
            vec![Violation::UnmatchedNoteOff {
                index: 0,
                pitch: 60
            }]
        );
    }

    #[test]
    fn time_overflow() {
        let cfg = MidiLikeConfig::default();
        let dec = decode_midilike(&padded(vec![TimeShift(10), TimeShift(10)]), &cfg, 120);
        assert_eq!(
            dec.violations,
            vec![Violation::TimeOverflow { index: 1, time: 20 }]
        );
    }

    #[test]
    fn token_round_trip() {
        let cfg = MidiLikeConfig {
            velocity_bins: 32,
            ..Default::default()
        };
        for tok in 0..cfg.vocab_size() as i32 {
            let ev = MusicEvent::from_token(tok, 16, 32).unwrap();
            assert_eq!(ev.token(16), tok);
        }
        assert_eq!(
            MusicEvent::from_token(cfg.vocab_size() as i32, 16, 32),
            None
        );
        assert_eq!(MusicEvent::SetVelocity(0).token(16), 273);
    }

    #[test]
    fn mono_stream() {
        let toks = encode_mono(&bar(&[(60, 0, 4)]), 16).unwrap();
        let mut expected = vec![
            MonoToken::Note(60),
            MonoToken::Hold,
            MonoToken::Hold,
            MonoToken::Hold,
        ];
        expected.extend([MonoToken::Rest; 12]);
        assert_eq!(toks, expected);
        assert_eq!(
            encode_mono(&bar(&[]), 16).unwrap(),
            vec![MonoToken::Rest; 16]
        );
        assert_eq!(
            encode_mono(&bar(&[(60, 0, 4), (64, 0, 4)]), 16),
            Err(EventError::NotMonophonic { column: 0 })
        );
        let dec = decode_mono(&toks, DEFAULT_VELOCITY, 120);
        assert!(dec.is_valid());
        assert_eq!(
            dec.bar.notes,
            vec![Note::new(60, 0, 480, DEFAULT_VELOCITY, 0)]
        );
    }

    #[test]
    fn mono_orphan_hold() {
        let mut toks = vec![MonoToken::Rest; 16];
        toks[3] = MonoToken::Hold;
        assert_eq!(
            decode_mono(&toks, 100, 120).violations,
            vec![Violation::OrphanHold { column: 3 }]
        );
    }
}
