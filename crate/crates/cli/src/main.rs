//! `sigrep` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "sigrep",
    version,
    about = "Signal-like and baseline encodings of symbolic music"
)]
struct Cli {
    /// Log progress at info level (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON configuration file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Random seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode every bar of a MIDI file as one tensor per bar.
    Convert {
        input: PathBuf,
        /// pianoroll, midilike, midilike_mono, notetuple or signallike.
        #[arg(long)]
        rep: String,
        #[command(flatten)]
        common: Common,
    },
    /// Build train/test tensors from a directory of MIDI files.
    BuildDataset {
        corpus: PathBuf,
        /// Comma-separated representations.
        #[arg(long, value_delimiter = ',')]
        reps: Option<Vec<String>>,
        /// Add every transposition that stays inside the corpus pitch range.
        #[arg(long)]
        augment: bool,
        #[arg(long)]
        split_ratio: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Decode a built dataset and compare every row with its source bar.
    Roundtrip {
        dataset: PathBuf,
        /// Exit with status 1 unless every representation is exact.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a synthetic chorale evaluation corpus.
    GenChorales {
        #[arg(long)]
        skeletons: Option<usize>,
        /// Realisations per skeleton.
        #[arg(long)]
        per: Option<usize>,
        /// Inclusive NHT count range, e.g. `0..8`.
        #[arg(long)]
        nht: Option<String>,
        /// Chords per bar (2, 4 or 8).
        #[arg(long)]
        chords: Option<usize>,
        /// Comma-separated NHT kinds.
        #[arg(long, value_delimiter = ',')]
        kinds: Option<Vec<String>>,
        /// Also write signal-like embeddings of every item (rows follow meta.jsonl).
        #[arg(long)]
        embed: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Distance profile, linearity and tonality clustering of an embedding table.
    Eval {
        /// PTNS tensor, one row per meta.jsonl line.
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Render signal-like encodings as 16-bit WAV files, one per bar.
    ExportWav {
        /// MIDI file or signal-like PTNS tensor.
        input: PathBuf,
        #[arg(long)]
        sample_rate: Option<u32>,
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                commands::EXIT_USAGE
            } else {
                0
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Convert { input, rep, common } => commands::convert(&input, &rep, &common),
        Command::BuildDataset {
            corpus,
            reps,
            augment,
            split_ratio,
            common,
        } => commands::build_dataset(&corpus, reps, augment, split_ratio, &common),
        Command::Roundtrip {
            dataset,
            strict,
            common,
        } => commands::roundtrip(&dataset, strict, &common),
        Command::GenChorales {
            skeletons,
            per,
            nht,
            chords,
            kinds,
            embed,
            common,
        } => commands::gen_chorales(
            commands::GenArgs {
                skeletons,
                per,
                nht,
                chords,
                kinds,
                embed,
            },
            &common,
        ),
        Command::Eval {
            embeddings,
            meta,
            common,
        } => commands::eval(&embeddings, &meta, &common),
        Command::ExportWav {
            input,
            sample_rate,
            common,
        } => commands::export_wav(&input, sample_rate, &common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
