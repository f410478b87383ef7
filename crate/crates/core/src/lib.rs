//! Symbolic music representations for learning embedding spaces.
//!
//! The centrepiece is [`signal`], an invertible mapping from a bar's
//! piano-roll to a short real waveform. Alongside it live the baselines it is
//! compared with ([`model`] piano-rolls, [`events`] MIDI-like sequences,
//! [`notetuple`]), SMF input/output, a synthetic chorale corpus generator,
//! evaluation metrics and the dataset pipeline.

pub mod chorale;
pub mod dataset;
pub mod events;
pub mod metrics;
pub mod midi;
pub mod model;
pub mod notetuple;
pub mod signal;
pub mod tensor;

pub use model::{Bar, GridNote, Note, PianoRoll, Score};
