//! Signal-like representation: piano-roll to compact waveform via prime bins
//! and the inverse STFT, and back.

mod codec;
mod primes;
mod stft;
mod wav;

use thiserror::Error;

pub use codec::{decode_signal, encode_signal, roll_to_complex, SignalCodec, SignalRep};
pub use primes::{primes_up_to, PrimeMap, HIGHEST_PRIME, LOWEST_PRIME, MIN_GAP};
pub use stft::{forward_stft, inverse_stft, ComplexMatrix, SpectralConfig, Stft, WindowKind};
pub use wav::{export_wav, read_wav, write_pcm16, Wav, DEFAULT_SAMPLE_RATE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("invalid spectral configuration: {0}")]
    InvalidConfig(String),
    #[error("matrix has {actual} rows, configuration expects {expected}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("signal of {len} samples is shorter than one {win_length}-sample window")]
    TooShort { len: usize, win_length: usize },
    #[error("{frames} frames need exactly {expected_len} samples, got {actual_len}")]
    FrameMismatch {
        frames: usize,
        expected_len: usize,
        actual_len: usize,
    },
    #[error("wav: {0}")]
    Wav(String),
}
