//! Writes the small chorale corpus shipped under `fixtures/chorales`.
//!
//! Each chorale stays in one key and strings together generated bars with
//! two, four or (rarely) eight chords, ornamented with a few non-harmonic
//! tones. Run with `cargo run -p sigrep-core --example make_fixtures [out_dir]`.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigrep::chorale::{
    child_seed, generate_skeleton, realize_skeleton, Key, Mode, NhtKind, QUANTUM,
};
use sigrep::midi::{write_midi, DEFAULT_PPQ};
use sigrep::model::{Note, Score};

const CHORALES: [(u8, Mode, usize); 3] = [
    (0, Mode::Major, 16),
    (9, Mode::Minor, 14),
    (7, Mode::Major, 18),
];

fn main() -> std::io::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map_or_else(|| "fixtures/chorales".into(), PathBuf::from);
    std::fs::create_dir_all(&out)?;
    for (c, &(tonic, mode, bars)) in CHORALES.iter().enumerate() {
        let key = Key::new(tonic, mode).expect("valid tonic");
        let mut rng = ChaCha8Rng::seed_from_u64(c as u64);
        let mut score = Score::new(DEFAULT_PPQ);
        for b in 0..bars {
            let chords = match rng.gen_range(0..20) {
                0 => 8,
                1..=8 => 2,
                _ => 4,
            };
            let seed = child_seed(2024, c as u64, b as u64);
            let skeleton = generate_skeleton(key, chords, seed).expect("fixture voicing");
            let nhts = rng.gen_range(0..=3);
            let bar = realize_skeleton(&skeleton, nhts, &NhtKind::ALL, seed)
                .or_else(|_| realize_skeleton(&skeleton, 0, &NhtKind::ALL, seed))
                .expect("zero ornaments always fit")
                .bar;
            let offset = b as u64 * 16 * QUANTUM;
            score.notes.extend(bar.notes.iter().map(|n| Note {
                onset: n.onset + offset,
                ..*n
            }));
        }
        score.sort_notes();
        let path = out.join(format!(
            "chorale_{:02}_{}.mid",
            c + 1,
            key.label().replace(':', "_").replace('#', "s")
        ));
        std::fs::write(&path, write_midi(&score))?;
        println!("{} ({} notes)", path.display(), score.notes.len());
    }
    Ok(())
}
