//! Keys, scales, diatonic triads and the functional progression grammar.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Major,
    Minor,
}

const NAMES: [&str; 12] = [
    "C", "C#", "D", "Eb", "E", "F", "F#", "G", "Ab", "A", "Bb", "B",
];

/// Tonic pitch class (0 = C) and mode. Minor keys use the harmonic minor scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Key {
    pub tonic: u8,
    pub mode: Mode,
}

impl Key {
    pub fn new(tonic: u8, mode: Mode) -> Option<Self> {
        (tonic < 12).then_some(Self { tonic, mode })
    }

    /// All 24 keys, majors first.
    pub fn all() -> Vec<Key> {
        [Mode::Major, Mode::Minor]
            .into_iter()
            .flat_map(|mode| (0..12).map(move |tonic| Key { tonic, mode }))
            .collect()
    }

    /// Scale pitch classes, tonic first.
    pub fn scale(&self) -> [u8; 7] {
        let steps: [u8; 7] = match self.mode {
            Mode::Major => [0, 2, 4, 5, 7, 9, 11],
            Mode::Minor => [0, 2, 3, 5, 7, 8, 11],
        };
        steps.map(|s| (self.tonic + s) % 12)
    }

    pub fn contains(&self, pitch: u8) -> bool {
        self.scale().contains(&(pitch % 12))
    }

    /// Nearest scale pitch strictly above (`up`) or below `pitch`.
    pub fn step(&self, pitch: u8, up: bool) -> Option<u8> {
        let mut p = i32::from(pitch);
        for _ in 0..4 {
            p += if up { 1 } else { -1 };
            if !(0..128).contains(&p) {
                return None;
            }
            if self.contains(p as u8) {
                return Some(p as u8);
            }
        }
        None
    }

    /// Triad pitch classes `[root, third, fifth]` on a scale degree (0-based).
    pub fn triad(&self, degree: u8) -> [u8; 3] {
        let s = self.scale();
        let d = usize::from(degree % 7);
        [s[d], s[(d + 2) % 7], s[(d + 4) % 7]]
    }

    /// Short label such as `C:maj` or `F#:min`.
    pub fn label(&self) -> String {
        let mode = match self.mode {
            Mode::Major => "maj",
            Mode::Minor => "min",
        };
        format!("{}:{mode}", NAMES[usize::from(self.tonic)])
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Function {
    Tonic,
    Subdominant,
    Dominant,
}

impl Function {
    /// T may go anywhere, S moves on to S or D, D resolves to T.
    pub fn successors(self) -> &'static [Function] {
        match self {
            Function::Tonic => &[Function::Tonic, Function::Subdominant, Function::Dominant],
            Function::Subdominant => &[Function::Subdominant, Function::Dominant],
            Function::Dominant => &[Function::Tonic],
        }
    }

    /// Scale degrees (0-based) realising this function.
    pub fn degrees(self, mode: Mode) -> &'static [u8] {
        match (self, mode) {
            (Function::Tonic, _) => &[0, 5],
            (Function::Subdominant, Mode::Major) => &[1, 3],
            (Function::Subdominant, Mode::Minor) => &[3],
            (Function::Dominant, _) => &[4],
        }
    }

    pub fn of_degree(degree: u8, mode: Mode) -> Option<Function> {
        [Function::Tonic, Function::Subdominant, Function::Dominant]
            .into_iter()
            .find(|f| f.degrees(mode).contains(&degree))
    }
}

/// Roman numeral for a 0-based degree, lower case for minor and diminished triads.
pub fn roman(key: &Key, degree: u8) -> String {
    const UPPER: [&str; 7] = ["I", "II", "III", "IV", "V", "VI", "VII"];
    let [root, third, _] = key.triad(degree);
    let numeral = UPPER[usize::from(degree % 7)];
    if (third + 12 - root) % 12 == 3 {
        numeral.to_lowercase()
    } else {
        numeral.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_major_and_a_minor() {
        let c = Key::new(0, Mode::Major).unwrap();
        assert_eq!(c.scale(), [0, 2, 4, 5, 7, 9, 11]);
        assert_eq!(c.triad(4), [7, 11, 2]);
        let a = Key::new(9, Mode::Minor).unwrap();
        // raised leading tone in the dominant
        assert_eq!(a.triad(4), [4, 8, 11]);
        assert_eq!(roman(&a, 4), "V");
        assert_eq!(roman(&a, 0), "i");
        assert_eq!(roman(&c, 1), "ii");
        assert_eq!(a.label(), "A:min");
    }

    #[test]
    fn scale_steps() {
        let c = Key::new(0, Mode::Major).unwrap();
        assert_eq!(c.step(60, true), Some(62));
        assert_eq!(c.step(64, true), Some(65));
        assert_eq!(c.step(60, false), Some(59));
        let a = Key::new(9, Mode::Minor).unwrap();
        // F to G# is an augmented second but still one scale step
        assert_eq!(a.step(65, true), Some(68));
        assert_eq!(c.step(127, true), None);
    }

    #[test]
    fn grammar_degrees_cover_functions() {
        for mode in [Mode::Major, Mode::Minor] {
            for f in [Function::Tonic, Function::Subdominant, Function::Dominant] {
                for &d in f.degrees(mode) {
                    assert_eq!(Function::of_degree(d, mode), Some(f));
                }
            }
        }
        assert_eq!(Function::Dominant.successors(), &[Function::Tonic]);
    }

    #[test]
    fn all_triad_tones_are_diatonic() {
        for key in Key::all() {
            for d in 0..7 {
                assert!(key.triad(d).iter().all(|&pc| key.contains(pc)));
            }
        }
    }
}
