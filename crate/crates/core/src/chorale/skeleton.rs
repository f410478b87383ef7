//! Four-part harmonic skeletons: a functional chord progression voiced in
//! root position under SATB voice-leading rules.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::theory::{Function, Key};
use super::ChoraleError;
use crate::midi::DEFAULT_PPQ;
use crate::model::{Bar, Note, Score, DEFAULT_STEPS, DEFAULT_VELOCITY};

/// Voice indices: soprano, alto, tenor, bass.
pub const SOPRANO: usize = 0;
pub const ALTO: usize = 1;
pub const TENOR: usize = 2;
pub const BASS: usize = 3;
pub const VOICES: usize = 4;

pub const VOICE_NAMES: [&str; VOICES] = ["soprano", "alto", "tenor", "bass"];

/// Inclusive MIDI ranges per voice.
pub const RANGES: [(u8, u8); VOICES] = [(60, 79), (55, 74), (48, 67), (40, 60)];

/// Widest allowed gap between soprano/alto and alto/tenor.
pub const MAX_UPPER_SPACING: u8 = 12;

/// Largest melodic move between chords for the upper voices and the bass.
pub const MAX_UPPER_LEAP: u8 = 7;
pub const MAX_BASS_LEAP: u8 = 12;

/// Ticks per column when rendering (sixteenth notes at the default resolution).
pub const QUANTUM: u64 = DEFAULT_PPQ as u64 / 4;

const SEARCH_BUDGET: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chord {
    /// 0-based scale degree of the root.
    pub degree: u8,
    /// Pitches indexed by voice (soprano first).
    pub pitches: [u8; VOICES],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skeleton {
    pub id: String,
    pub key: Key,
    pub chords: Vec<Chord>,
    pub steps: usize,
}

impl Skeleton {
    /// Columns per chord.
    pub fn span(&self) -> usize {
        self.steps / self.chords.len()
    }

    /// Index of the chord sounding at `column`.
    pub fn chord_index(&self, column: usize) -> usize {
        (column / self.span()).min(self.chords.len() - 1)
    }

    /// One note per voice and chord, every chord re-articulated.
    pub fn render(&self) -> Bar {
        let span = self.span() as u64;
        let mut bar = Bar::empty(0, QUANTUM, self.steps);
        for (i, chord) in self.chords.iter().enumerate() {
            for (voice, &pitch) in chord.pitches.iter().enumerate() {
                bar.notes.push(Note::new(
                    pitch,
                    i as u64 * span * QUANTUM,
                    span * QUANTUM,
                    DEFAULT_VELOCITY,
                    voice as u8,
                ));
            }
        }
        sort_bar(&mut bar);
        bar
    }
}

/// Canonical note order for rendered chorale bars.
pub(crate) fn sort_bar(bar: &mut Bar) {
    bar.notes
        .sort_by_key(|n| (n.voice, n.onset, n.pitch, n.duration));
}

/// Wraps a single chorale bar into a 4/4 score at [`QUANTUM`] ticks per column.
pub fn bar_to_score(bar: &Bar) -> Score {
    let mut score = Score::new(DEFAULT_PPQ);
    score.notes = bar.notes.clone();
    score.sort_notes();
    score
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SkeletonIssue {
    NonDiatonic {
        chord: usize,
        voice: usize,
        pitch: u8,
    },
    NotInChord {
        chord: usize,
        voice: usize,
        pitch: u8,
    },
    BassNotRoot {
        chord: usize,
    },
    MissingThird {
        chord: usize,
    },
    OutOfRange {
        chord: usize,
        voice: usize,
        pitch: u8,
    },
    Crossing {
        chord: usize,
        upper: usize,
    },
    Spacing {
        chord: usize,
        upper: usize,
    },
    Parallel {
        chord: usize,
        upper: usize,
        lower: usize,
        interval: u8,
    },
    Leap {
        chord: usize,
        voice: usize,
    },
    BadLength,
}

/// Every rule violation in a skeleton; empty when it is well formed.
pub fn check_skeleton(s: &Skeleton) -> Vec<SkeletonIssue> {
    let mut issues = Vec::new();
    if s.chords.len() < 2 || !s.steps.is_multiple_of(s.chords.len()) || s.span() < 2 {
        issues.push(SkeletonIssue::BadLength);
    }
    for (i, chord) in s.chords.iter().enumerate() {
        issues.extend(chord_issues(&s.key, i, chord));
        if i > 0 {
            issues.extend(motion_issues(i, &s.chords[i - 1].pitches, &chord.pitches));
        }
    }
    issues
}

fn chord_issues(key: &Key, index: usize, chord: &Chord) -> Vec<SkeletonIssue> {
    let mut out = Vec::new();
    let triad = key.triad(chord.degree);
    let p = chord.pitches;
    for voice in 0..VOICES {
        let pitch = p[voice];
        if !key.contains(pitch) {
            out.push(SkeletonIssue::NonDiatonic {
                chord: index,
                voice,
                pitch,
            });
        }
        if !triad.contains(&(pitch % 12)) {
            out.push(SkeletonIssue::NotInChord {
                chord: index,
                voice,
                pitch,
            });
        }
        let (lo, hi) = RANGES[voice];
        if !(lo..=hi).contains(&pitch) {
            out.push(SkeletonIssue::OutOfRange {
                chord: index,
                voice,
                pitch,
            });
        }
    }
    if p[BASS] % 12 != triad[0] {
        out.push(SkeletonIssue::BassNotRoot { chord: index });
    }
    if !p.iter().any(|&x| x % 12 == triad[1]) {
        out.push(SkeletonIssue::MissingThird { chord: index });
    }
    for upper in SOPRANO..BASS {
        if p[upper] <= p[upper + 1] {
            out.push(SkeletonIssue::Crossing {
                chord: index,
                upper,
            });
        } else if upper < TENOR && p[upper] - p[upper + 1] > MAX_UPPER_SPACING {
            out.push(SkeletonIssue::Spacing {
                chord: index,
                upper,
            });
        }
    }
    out
}

fn motion_issues(index: usize, prev: &[u8; VOICES], cur: &[u8; VOICES]) -> Vec<SkeletonIssue> {
    let mut out = Vec::new();
    for upper in 0..VOICES {
        for lower in upper + 1..VOICES {
            let before = prev[upper].abs_diff(prev[lower]) % 12;
            let after = cur[upper].abs_diff(cur[lower]) % 12;
            let moved = prev[upper] != cur[upper] || prev[lower] != cur[lower];
            if moved && before == after && (after == 0 || after == 7) {
                out.push(SkeletonIssue::Parallel {
                    chord: index,
                    upper,
                    lower,
                    interval: after,
                });
            }
        }
    }
    for voice in 0..VOICES {
        let limit = if voice == BASS {
            MAX_BASS_LEAP
        } else {
            MAX_UPPER_LEAP
        };
        if prev[voice].abs_diff(cur[voice]) > limit {
            out.push(SkeletonIssue::Leap {
                chord: index,
                voice,
            });
        }
    }
    out
}

/// Root-position voicings of a triad satisfying the range, order, spacing and
/// completeness rules.
pub fn voicings(key: &Key, degree: u8) -> Vec<[u8; VOICES]> {
    let triad = key.triad(degree);
    let tones = |voice: usize| {
        let (lo, hi) = RANGES[voice];
        (lo..=hi).filter(move |p| triad.contains(&(p % 12)))
    };
    let mut out = Vec::new();
    for b in tones(BASS).filter(|p| p % 12 == triad[0]) {
        for t in tones(TENOR).filter(|&t| t > b) {
            for a in tones(ALTO).filter(|&a| a > t && a - t <= MAX_UPPER_SPACING) {
                for s in tones(SOPRANO).filter(|&s| s > a && s - a <= MAX_UPPER_SPACING) {
                    let v = [s, a, t, b];
                    if v.iter().any(|&x| x % 12 == triad[1]) {
                        out.push(v);
                    }
                }
            }
        }
    }
    out
}

/// Draws a progression from the functional grammar, starting on the tonic
/// and never repeating a chord, then voices it by depth-first search with
/// randomised candidate order.
pub fn generate_skeleton(key: Key, n_chords: usize, seed: u64) -> Result<Skeleton, ChoraleError> {
    if n_chords < 2 || !DEFAULT_STEPS.is_multiple_of(n_chords) || DEFAULT_STEPS / n_chords < 2 {
        return Err(ChoraleError::InvalidChordCount(n_chords));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degrees = vec![0u8];
    let mut function = Function::Tonic;
    while degrees.len() < n_chords {
        let current = *degrees.last().expect("starts on the tonic");
        // successor functions that still offer a chord other than the current one
        let moves: Vec<(Function, Vec<u8>)> = function
            .successors()
            .iter()
            .map(|&f| {
                let d: Vec<u8> = f
                    .degrees(key.mode)
                    .iter()
                    .copied()
                    .filter(|&d| d != current)
                    .collect();
                (f, d)
            })
            .filter(|(_, d)| !d.is_empty())
            .collect();
        let (next, choices) = moves.choose(&mut rng).expect("every function can move on");
        function = *next;
        degrees.push(*choices.choose(&mut rng).expect("non-empty"));
    }

    let options: Vec<Vec<[u8; VOICES]>> = degrees.iter().map(|&d| voicings(&key, d)).collect();
    let mut chosen: Vec<[u8; VOICES]> = Vec::with_capacity(n_chords);
    let mut budget = SEARCH_BUDGET;
    if !search(&options, &mut chosen, &mut rng, &mut budget) {
        return Err(ChoraleError::InfeasibleVoicing { seed });
    }
    let chords = degrees
        .into_iter()
        .zip(chosen)
        .map(|(degree, pitches)| Chord { degree, pitches })
        .collect();
    Ok(Skeleton {
        id: format!("sk-{seed:016x}"),
        key,
        chords,
        steps: DEFAULT_STEPS,
    })
}

fn search(
    options: &[Vec<[u8; VOICES]>],
    chosen: &mut Vec<[u8; VOICES]>,
    rng: &mut ChaCha8Rng,
    budget: &mut usize,
) -> bool {
    let index = chosen.len();
    if index == options.len() {
        return true;
    }
    let mut candidates: Vec<(f64, [u8; VOICES])> = match chosen.last() {
        None => options[index]
            .iter()
            .map(|&v| (rng.gen::<f64>(), v))
            .collect(),
        Some(prev) => options[index]
            .iter()
            .filter(|v| motion_issues(index, prev, v).is_empty())
            .map(|&v| {
                let movement: u32 = (0..VOICES).map(|k| u32::from(prev[k].abs_diff(v[k]))).sum();
                (f64::from(movement) + rng.gen::<f64>() * 4.0, v)
            })
            .collect(),
    };
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (_, v) in candidates {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        chosen.push(v);
        if search(options, chosen, rng, budget) {
            return true;
        }
        chosen.pop();
    }
    false
}
