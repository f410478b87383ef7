//! NoteTuple representation: a fixed number of (offset, pitch, velocity, duration) tuples per bar.
//!
//! Offsets are measured onset to onset in columns, so chord members share an
//! offset of zero. Tensor layout is `max_tuples x 4` integers; an empty
//! tuple is all zeros (duration 0 marks it).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Bar, GridNote};

pub const DEFAULT_MAX_TUPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct NoteTuple {
    pub time_offset: u32,
    pub pitch: u8,
    pub velocity: u8,
    pub duration: u32,
}

impl NoteTuple {
    pub const EMPTY: NoteTuple = NoteTuple {
        time_offset: 0,
        pitch: 0,
        velocity: 0,
        duration: 0,
    };

    pub fn is_empty(&self) -> bool {
        self.duration == 0
    }

    pub fn to_row(self) -> [i32; 4] {
        [
            self.time_offset as i32,
            i32::from(self.pitch),
            i32::from(self.velocity),
            self.duration as i32,
        ]
    }

    pub fn from_row(row: [i32; 4]) -> Self {
        Self {
            time_offset: row[0].max(0) as u32,
            pitch: row[1].clamp(0, 127) as u8,
            velocity: row[2].clamp(0, 127) as u8,
            duration: row[3].max(0) as u32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleSequence {
    pub tuples: Vec<NoteTuple>,
}

impl TupleSequence {
    /// Flat row-major `len x 4` integers.
    pub fn to_i32(&self) -> Vec<i32> {
        self.tuples.iter().flat_map(|t| t.to_row()).collect()
    }

    pub fn from_i32(values: &[i32]) -> Self {
        let tuples = values
            .chunks_exact(4)
            .map(|c| NoteTuple::from_row([c[0], c[1], c[2], c[3]]))
            .collect();
        Self { tuples }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NoteTupleError {
    #[error("bar has {notes} notes, budget is {budget}")]
    OverBudget { notes: usize, budget: usize },
    #[error("tuple {index} starts at column {onset}, past the bar's {steps} columns")]
    OverflowViolation {
        index: usize,
        onset: usize,
        steps: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TupleIssue {
    /// Note ran past the end of the bar and was shortened.
    Clipped {
        index: usize,
        pitch: u8,
        overhang: usize,
    },
    /// A non-empty tuple followed padding.
    PaddingNotAtTail { index: usize },
}

pub fn encode_notetuple(bar: &Bar, max_tuples: usize) -> Result<TupleSequence, NoteTupleError> {
    let mut notes = bar.grid_notes();
    if notes.len() > max_tuples {
        return Err(NoteTupleError::OverBudget {
            notes: notes.len(),
            budget: max_tuples,
        });
    }
    notes.sort_by_key(|g| (g.start, g.pitch, g.len, g.velocity));
    let mut prev = 0;
    let mut tuples: Vec<NoteTuple> = notes
        .iter()
        .map(|g| {
            let t = NoteTuple {
                time_offset: (g.start - prev) as u32,
                pitch: g.pitch,
                velocity: g.velocity,
                duration: g.len as u32,
            };
            prev = g.start;
            t
        })
        .collect();
    tuples.resize(max_tuples, NoteTuple::EMPTY);
    Ok(TupleSequence { tuples })
}

/// Decodes tuples into a bar of `steps` columns, reporting clipped notes.
pub fn decode_notetuple(
    seq: &TupleSequence,
    steps: usize,
    quantum: u64,
) -> Result<(Bar, Vec<TupleIssue>), NoteTupleError> {
    let mut issues = Vec::new();
    let mut notes = Vec::new();
    let mut onset = 0usize;
    let mut seen_pad = false;
    for (index, t) in seq.tuples.iter().enumerate() {
        if t.is_empty() {
            seen_pad = true;
            continue;
        }
        if seen_pad {
            issues.push(TupleIssue::PaddingNotAtTail { index });
        }
        onset += t.time_offset as usize;
        if onset >= steps {
            return Err(NoteTupleError::OverflowViolation {
                index,
                onset,
                steps,
            });
        }
        let end = onset + t.duration as usize;
        let len = if end > steps {
            issues.push(TupleIssue::Clipped {
                index,
                pitch: t.pitch,
                overhang: end - steps,
            });
            steps - onset
        } else {
            t.duration as usize
        };
        notes.push(GridNote {
            start: onset,
            len,
            pitch: t.pitch,
            velocity: t.velocity,
        });
    }
    notes.sort();
    Ok((Bar::from_grid(0, quantum, steps, &notes), issues))
}
