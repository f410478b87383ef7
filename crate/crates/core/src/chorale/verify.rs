//! Mechanical check of a realisation against its skeleton.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::realise::{nht_span, NhtKind, Realisation};
use super::skeleton::{sort_bar, Skeleton, QUANTUM, VOICES};
use crate::model::Note;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RealisationIssue {
    SkeletonIdMismatch {
        expected: String,
        found: String,
    },
    CountMismatch {
        declared: usize,
        listed: usize,
    },
    OutOfBounds {
        index: usize,
    },
    /// Column or length do not match the kind's rhythmic slot.
    Placement {
        index: usize,
    },
    /// Melodic pattern does not match the declared kind.
    KindPattern {
        index: usize,
        kind: NhtKind,
        pitch: u8,
        from: u8,
        to: u8,
    },
    /// Two tones share a (voice, transition) or a (voice, chord) slot.
    Conflict {
        index: usize,
    },
    /// The bar has no note matching the listed tone.
    MissingNote {
        index: usize,
    },
    /// Stripping the tones does not give back the skeleton.
    RecoveryMismatch {
        missing: Vec<Note>,
        unexpected: Vec<Note>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub issues: Vec<RealisationIssue>,
}

impl VerifyReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

pub fn verify_realisation(r: &Realisation, s: &Skeleton) -> VerifyReport {
    let mut issues = Vec::new();
    if r.skeleton_id != s.id {
        issues.push(RealisationIssue::SkeletonIdMismatch {
            expected: s.id.clone(),
            found: r.skeleton_id.clone(),
        });
    }
    if r.nht_count != r.nhts.len() {
        issues.push(RealisationIssue::CountMismatch {
            declared: r.nht_count,
            listed: r.nhts.len(),
        });
    }
    let span = s.span();
    let transitions = s.chords.len().saturating_sub(1);
    let mut transition_slots = BTreeSet::new();
    let mut chord_slots = BTreeSet::new();
    for (index, n) in r.nhts.iter().enumerate() {
        let voice = usize::from(n.voice);
        if voice >= VOICES || n.transition >= transitions {
            issues.push(RealisationIssue::OutOfBounds { index });
            continue;
        }
        if nht_span(n.kind, n.transition, span) != (n.column, n.len) {
            issues.push(RealisationIssue::Placement { index });
        }
        let from = s.chords[n.transition].pitches[voice];
        let to = s.chords[n.transition + 1].pitches[voice];
        if !n.kind.candidates(&s.key, from, to).contains(&n.pitch) {
            issues.push(RealisationIssue::KindPattern {
                index,
                kind: n.kind,
                pitch: n.pitch,
                from,
                to,
            });
        }
        if !transition_slots.insert((voice, n.transition))
            || !chord_slots.insert((voice, n.host_chord()))
        {
            issues.push(RealisationIssue::Conflict { index });
        }
        let present = r.bar.notes.iter().any(|note| {
            usize::from(note.voice) == voice
                && note.pitch == n.pitch
                && note.onset == n.column as u64 * QUANTUM
                && note.duration == n.len as u64 * QUANTUM
        });
        if !present {
            issues.push(RealisationIssue::MissingNote { index });
        }
    }
    if let Some(issue) = recovery_issue(r, s) {
        issues.push(issue);
    }
    VerifyReport { issues }
}

/// Replaces every listed tone by the chord tone beneath it, re-joins the
/// pieces of each chord tone and compares with the skeleton's rendering.
fn recovery_issue(r: &Realisation, s: &Skeleton) -> Option<RealisationIssue> {
    let span_ticks = s.span() as u64 * QUANTUM;
    let mut notes: Vec<Note> = r
        .bar
        .notes
        .iter()
        .map(|note| {
            let listed = r.nhts.iter().any(|n| {
                usize::from(n.voice) == usize::from(note.voice)
                    && n.pitch == note.pitch
                    && n.column as u64 * QUANTUM == note.onset
            });
            let chord = (note.onset / span_ticks) as usize;
            match (listed, s.chords.get(chord)) {
                (true, Some(c)) if usize::from(note.voice) < VOICES => Note {
                    pitch: c.pitches[usize::from(note.voice)],
                    ..*note
                },
                _ => *note,
            }
        })
        .collect();
    notes.sort_by_key(|n| (n.voice, n.onset, n.pitch, n.duration));

    let mut joined: Vec<Note> = Vec::with_capacity(notes.len());
    for note in notes {
        match joined.last_mut() {
            Some(last)
                if last.voice == note.voice
                    && last.pitch == note.pitch
                    && last.end() == note.onset
                    && note.onset % span_ticks != 0 =>
            {
                last.duration += note.duration;
            }
            _ => joined.push(note),
        }
    }
    let mut recovered = r.bar.clone();
    recovered.notes = joined;
    sort_bar(&mut recovered);
    let expected = s.render();
    if recovered.notes == expected.notes {
        return None;
    }
    let missing = expected
        .notes
        .iter()
        .filter(|n| !recovered.notes.contains(n))
        .copied()
        .collect();
    let unexpected = recovered
        .notes
        .iter()
        .filter(|n| !expected.notes.contains(n))
        .copied()
        .collect();
    Some(RealisationIssue::RecoveryMismatch {
        missing,
        unexpected,
    })
}
