//! Ornamenting skeletons with labelled non-harmonic tones.
//!
//! Every NHT sits on a (voice, transition) pair: the move of one voice from
//! its tone `x` in chord `i` to its tone `y` in chord `i + 1`. Unaccented
//! kinds replace the second half of chord `i`, accented kinds (suspension,
//! appoggiatura) the first half of chord `i + 1`. A voice carries at most one
//! NHT per chord, so every chord tone still sounds for at least half a chord.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::skeleton::{sort_bar, Skeleton, QUANTUM, VOICES};
use super::theory::Key;
use super::{splitmix64, ChoraleError};
use crate::model::{Bar, Note, DEFAULT_VELOCITY};

const PLACEMENT_ATTEMPTS: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NhtKind {
    Passing,
    Neighbor,
    Suspension,
    Anticipation,
    Escape,
    Appoggiatura,
}

impl NhtKind {
    pub const ALL: [NhtKind; 6] = [
        NhtKind::Passing,
        NhtKind::Neighbor,
        NhtKind::Suspension,
        NhtKind::Anticipation,
        NhtKind::Escape,
        NhtKind::Appoggiatura,
    ];

    /// Accented kinds fall on the beat of the following chord.
    pub fn is_accented(self) -> bool {
        matches!(self, NhtKind::Suspension | NhtKind::Appoggiatura)
    }

    pub fn name(self) -> &'static str {
        match self {
            NhtKind::Passing => "passing",
            NhtKind::Neighbor => "neighbor",
            NhtKind::Suspension => "suspension",
            NhtKind::Anticipation => "anticipation",
            NhtKind::Escape => "escape",
            NhtKind::Appoggiatura => "appoggiatura",
        }
    }

    pub fn parse(name: &str) -> Option<NhtKind> {
        NhtKind::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Pitches this kind may take between chord tones `x` and `y` of one voice.
    pub fn candidates(self, key: &Key, x: u8, y: u8) -> Vec<u8> {
        let step = |p: u8, up: bool| key.step(p, up);
        let out: Vec<Option<u8>> = match self {
            NhtKind::Passing => [true, false]
                .into_iter()
                .map(|up| step(x, up).filter(|&p| step(p, up) == Some(y)))
                .collect(),
            NhtKind::Neighbor if x == y => vec![step(x, true), step(x, false)],
            NhtKind::Anticipation if x != y => vec![Some(y)],
            NhtKind::Escape if x != y => vec![step(x, y < x)],
            NhtKind::Suspension if step(x, false) == Some(y) => vec![Some(x)],
            NhtKind::Appoggiatura => vec![step(y, true), step(y, false)]
                .into_iter()
                .map(|p| p.filter(|&p| p.abs_diff(x) >= 3))
                .collect(),
            _ => Vec::new(),
        };
        out.into_iter().flatten().collect()
    }
}

impl fmt::Display for NhtKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NonHarmonicTone {
    pub kind: NhtKind,
    pub voice: u8,
    /// Transition `i` joins chord `i` and chord `i + 1`.
    pub transition: usize,
    pub column: usize,
    /// Length in columns.
    pub len: usize,
    pub pitch: u8,
}

impl NonHarmonicTone {
    /// Chord whose span the tone occupies.
    pub fn host_chord(&self) -> usize {
        self.transition + usize::from(self.kind.is_accented())
    }
}

/// Columns `(start, len)` an NHT of `kind` occupies for transition `t`.
pub fn nht_span(kind: NhtKind, transition: usize, span: usize) -> (usize, usize) {
    let half = span / 2;
    if kind.is_accented() {
        ((transition + 1) * span, half)
    } else {
        ((transition + 1) * span - half, half)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Realisation {
    pub id: String,
    pub skeleton_id: String,
    pub bar: Bar,
    pub nhts: Vec<NonHarmonicTone>,
    pub nht_count: usize,
    pub seed: u64,
}

/// A (voice, transition) pair and the ornaments it admits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Site {
    pub voice: usize,
    pub transition: usize,
    pub options: Vec<(NhtKind, u8)>,
}

/// Sites with at least one applicable kind from `kinds`.
///
/// Candidates doubling another voice of the skeleton at the same time are
/// excluded, so every ornament changes the sounding pitch set.
pub fn insertion_sites(s: &Skeleton, kinds: &[NhtKind]) -> Vec<Site> {
    let mut sites = Vec::new();
    for transition in 0..s.chords.len().saturating_sub(1) {
        for voice in 0..VOICES {
            let x = s.chords[transition].pitches[voice];
            let y = s.chords[transition + 1].pitches[voice];
            let mut options = Vec::new();
            for &kind in kinds {
                let host = &s.chords[transition + usize::from(kind.is_accented())];
                for p in kind.candidates(&s.key, x, y) {
                    let doubled = (0..VOICES).any(|v| v != voice && host.pitches[v] == p);
                    if !doubled && !options.contains(&(kind, p)) {
                        options.push((kind, p));
                    }
                }
            }
            if !options.is_empty() {
                sites.push(Site {
                    voice,
                    transition,
                    options,
                });
            }
        }
    }
    sites
}

/// Inserts exactly `nht_count` NHTs drawn from `kinds`.
pub fn realize_skeleton(
    s: &Skeleton,
    nht_count: usize,
    kinds: &[NhtKind],
    seed: u64,
) -> Result<Realisation, ChoraleError> {
    let sites = insertion_sites(s, kinds);
    if nht_count > sites.len() {
        return Err(ChoraleError::InsufficientSites {
            requested: nht_count,
            available: sites.len(),
        });
    }
    let span = s.span();
    let mut best = 0;
    for attempt in 0..PLACEMENT_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ attempt.wrapping_mul(0x9e37)));
        let mut order = sites.clone();
        order.shuffle(&mut rng);
        let mut placed: Vec<NonHarmonicTone> = Vec::with_capacity(nht_count);
        let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
        for site in &order {
            if placed.len() == nht_count {
                break;
            }
            let mut options: Vec<NonHarmonicTone> = site
                .options
                .iter()
                .map(|&(kind, pitch)| {
                    let (column, len) = nht_span(kind, site.transition, span);
                    NonHarmonicTone {
                        kind,
                        voice: site.voice as u8,
                        transition: site.transition,
                        column,
                        len,
                        pitch,
                    }
                })
                .filter(|n| !used.contains(&(site.voice, n.host_chord())))
                .filter(|n| !placed.iter().any(|o| collides(o, n)))
                .collect();
            options.shuffle(&mut rng);
            if let Some(n) = options.first() {
                used.insert((site.voice, n.host_chord()));
                placed.push(*n);
            }
        }
        if placed.len() == nht_count {
            placed.sort_by_key(|n| (n.transition, n.voice));
            let bar = render_realisation(s, &placed);
            return Ok(Realisation {
                id: format!("{}-x{seed:016x}", s.id),
                skeleton_id: s.id.clone(),
                bar,
                nht_count,
                nhts: placed,
                seed,
            });
        }
        best = best.max(placed.len());
    }
    Err(ChoraleError::InsufficientSites {
        requested: nht_count,
        available: best,
    })
}

/// Two ornaments in different voices sounding the same pitch at the same time.
fn collides(a: &NonHarmonicTone, b: &NonHarmonicTone) -> bool {
    a.pitch == b.pitch && a.column < b.column + b.len && b.column < a.column + a.len
}

/// Renders the skeleton with each NHT replacing part of its host chord tone.
pub fn render_realisation(s: &Skeleton, nhts: &[NonHarmonicTone]) -> Bar {
    let span = s.span();
    let mut bar = Bar::empty(0, QUANTUM, s.steps);
    let mut push = |pitch: u8, start: usize, len: usize, voice: usize| {
        bar.notes.push(Note::new(
            pitch,
            (start as u64) * QUANTUM,
            (len as u64) * QUANTUM,
            DEFAULT_VELOCITY,
            voice as u8,
        ));
    };
    for (i, chord) in s.chords.iter().enumerate() {
        for (voice, &pitch) in chord.pitches.iter().enumerate() {
            let start = i * span;
            match nhts
                .iter()
                .find(|n| usize::from(n.voice) == voice && n.host_chord() == i)
            {
                None => push(pitch, start, span, voice),
                Some(n) if n.kind.is_accented() => {
                    push(n.pitch, n.column, n.len, voice);
                    push(pitch, n.column + n.len, span - n.len, voice);
                }
                Some(n) => {
                    push(pitch, start, span - n.len, voice);
                    push(n.pitch, n.column, n.len, voice);
                }
            }
        }
    }
    sort_bar(&mut bar);
    bar
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chorale::skeleton::{generate_skeleton, Chord};
    use crate::chorale::theory::Mode;

    fn c_major() -> Key {
        Key::new(0, Mode::Major).unwrap()
    }

    #[test]
    fn candidate_patterns() {
        let key = c_major();
        assert_eq!(NhtKind::Passing.candidates(&key, 60, 64), vec![62]);
        assert_eq!(NhtKind::Passing.candidates(&key, 67, 64), vec![65]);
        assert!(NhtKind::Passing.candidates(&key, 60, 67).is_empty());
        assert_eq!(NhtKind::Neighbor.candidates(&key, 64, 64), vec![65, 62]);
        assert_eq!(NhtKind::Anticipation.candidates(&key, 64, 65), vec![65]);
        assert_eq!(NhtKind::Escape.candidates(&key, 72, 67), vec![74]);
        assert_eq!(NhtKind::Suspension.candidates(&key, 72, 71), vec![72]);
        assert!(NhtKind::Suspension.candidates(&key, 72, 74).is_empty());
        assert_eq!(NhtKind::Appoggiatura.candidates(&key, 60, 67), vec![69, 65]);
    }

    #[test]
    fn zero_nhts_renders_skeleton() {
        let s = generate_skeleton(c_major(), 4, 1).unwrap();
        let r = realize_skeleton(&s, 0, &NhtKind::ALL, 5).unwrap();
        assert_eq!(r.bar, s.render());
        assert_eq!(r.nht_count, 0);
    }

    #[test]
    fn exact_count_and_disjoint_hosts() {
        let s = generate_skeleton(c_major(), 4, 2).unwrap();
        for n in 0..=8 {
            let r = realize_skeleton(&s, n, &NhtKind::ALL, n as u64).unwrap();
            assert_eq!(r.nhts.len(), n);
            let hosts: BTreeSet<_> = r.nhts.iter().map(|t| (t.voice, t.host_chord())).collect();
            assert_eq!(hosts.len(), n);
        }
    }

    #[test]
    fn too_few_sites_is_a_deficit() {
        // Two identical chords: only neighbour tones apply, one per voice.
        let chord = Chord {
            degree: 0,
            pitches: [72, 67, 64, 48],
        };
        let s = Skeleton {
            id: "s".into(),
            key: c_major(),
            chords: vec![chord, chord],
            steps: 16,
        };
        let sites = insertion_sites(&s, &[NhtKind::Neighbor]);
        assert_eq!(sites.len(), 4);
        assert_eq!(
            realize_skeleton(&s, 10, &[NhtKind::Neighbor], 0),
            Err(ChoraleError::InsufficientSites {
                requested: 10,
                available: 4
            })
        );
        assert!(insertion_sites(&s, &[NhtKind::Passing]).is_empty());
    }

    #[test]
    fn spans() {
        assert_eq!(nht_span(NhtKind::Passing, 0, 4), (2, 2));
        assert_eq!(nht_span(NhtKind::Suspension, 0, 4), (4, 2));
        assert_eq!(nht_span(NhtKind::Neighbor, 2, 8), (20, 4));
        assert_eq!(nht_span(NhtKind::Appoggiatura, 6, 2), (14, 1));
    }
}
