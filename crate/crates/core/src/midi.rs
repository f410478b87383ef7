//! Standard MIDI File (formats 0 and 1) reader and writer.
//!
//! The reader is total: any byte string yields either a [`Score`] with
//! diagnostics or a structured [`MidiError`].

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Note, Score, TempoEvent, TimeSignature};

/// Resolution used by [`write_midi`] when the score does not provide one.
pub const DEFAULT_PPQ: u16 = 480;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MidiError {
    #[error("file too short for an SMF header ({0} bytes)")]
    TruncatedHeader(usize),
    #[error("missing MThd chunk magic")]
    BadMagic,
    #[error("header chunk length {0} is shorter than 6")]
    BadHeaderLength(u32),
    #[error("unsupported SMF format {0}")]
    UnsupportedFormat(u16),
    #[error("SMPTE time division is not supported")]
    SmpteDivision,
    #[error("ticks per quarter note is zero")]
    ZeroDivision,
    #[error("data byte 0x{byte:02x} at offset {offset} without running status")]
    MissingStatus { offset: usize, byte: u8 },
    #[error("variable-length quantity at offset {0} is longer than 4 bytes")]
    VlqOverflow(usize),
    #[error("event at offset {0} runs past the end of its track")]
    TruncatedEvent(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MidiDiagnostics {
    pub warnings: Vec<(usize, String)>,
    pub track_count: usize,
    pub format: u16,
}

impl MidiDiagnostics {
    fn warn(&mut self, offset: usize, msg: impl Into<String>) {
        self.warnings.push((offset, msg.into()));
    }
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    /// Absolute offset of `data[0]` in the file.
    base: usize,
}

impl<'a> Reader<'a> {
    fn offset(&self) -> usize {
        self.base + self.pos
    }

    fn u8(&mut self) -> Option<u8> {
        let b = *self.data.get(self.pos)?;
        self.pos += 1;
        Some(b)
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.data.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn vlq(&mut self) -> Result<u32, MidiError> {
        let start = self.offset();
        let mut value = 0u32;
        for _ in 0..4 {
            let b = self.u8().ok_or(MidiError::TruncatedEvent(start))?;
            value = (value << 7) | u32::from(b & 0x7f);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(MidiError::VlqOverflow(start))
    }
}

fn be_u16(b: &[u8]) -> u16 {
    u16::from_be_bytes([b[0], b[1]])
}

fn be_u32(b: &[u8]) -> u32 {
    u32::from_be_bytes([b[0], b[1], b[2], b[3]])
}

#[derive(Default)]
struct TrackData {
    notes: Vec<Note>,
    time_signatures: Vec<TimeSignature>,
    tempos: Vec<TempoEvent>,
}

/// Parses an SMF byte string.
///
/// Note-ons are paired with note-offs per (channel, pitch), earliest open
/// note first. A note-on with velocity 0 is a note-off.
pub fn parse_midi(bytes: &[u8]) -> Result<(Score, MidiDiagnostics), MidiError> {
    if bytes.len() < 14 {
        return Err(MidiError::TruncatedHeader(bytes.len()));
    }
    if &bytes[0..4] != b"MThd" {
        return Err(MidiError::BadMagic);
    }
    let header_len = be_u32(&bytes[4..8]);
    if header_len < 6 {
        return Err(MidiError::BadHeaderLength(header_len));
    }
    let format = be_u16(&bytes[8..10]);
    let declared_tracks = be_u16(&bytes[10..12]);
    let division = be_u16(&bytes[12..14]);
    if format > 1 {
        return Err(MidiError::UnsupportedFormat(format));
    }
    if division & 0x8000 != 0 {
        return Err(MidiError::SmpteDivision);
    }
    if division == 0 {
        return Err(MidiError::ZeroDivision);
    }

    let mut diag = MidiDiagnostics {
        format,
        ..Default::default()
    };
    let mut pos = 8usize.saturating_add(header_len as usize);
    if pos > bytes.len() {
        return Err(MidiError::TruncatedHeader(bytes.len()));
    }
    let mut tracks = Vec::new();
    while pos < bytes.len() {
        if bytes.len() - pos < 8 {
            diag.warn(pos, "trailing bytes after last chunk");
            break;
        }
        let magic = &bytes[pos..pos + 4];
        let len = be_u32(&bytes[pos + 4..pos + 8]) as usize;
        let body_start = pos + 8;
        let body_end = body_start.saturating_add(len);
        let body_end = if body_end > bytes.len() {
            diag.warn(
                pos,
                format!("chunk declares {len} bytes but the file ends early"),
            );
            bytes.len()
        } else {
            body_end
        };
        if magic == b"MTrk" {
            let track = parse_track(&bytes[body_start..body_end], body_start, &mut diag)?;
            tracks.push(track);
        } else {
            diag.warn(
                pos,
                format!(
                    "skipping unknown chunk {:?}",
                    String::from_utf8_lossy(magic)
                ),
            );
        }
        pos = body_end;
    }
    diag.track_count = tracks.len();
    if tracks.len() != usize::from(declared_tracks) {
        diag.warn(
            10,
            format!(
                "header declares {declared_tracks} tracks, found {}",
                tracks.len()
            ),
        );
    }

    // Format 1 voices follow track order; a leading conductor track without notes is not a voice.
    let conductor = format == 1 && tracks.first().is_some_and(|t| t.notes.is_empty());
    let mut score = Score::new(division);
    score.time_signatures.clear();
    for (i, track) in tracks.into_iter().enumerate() {
        for mut note in track.notes {
            if format == 1 {
                let voice = if conductor { i - 1 } else { i };
                note.voice = voice.min(u8::MAX as usize) as u8;
            }
            score.notes.push(note);
        }
        score.time_signatures.extend(track.time_signatures);
        score.tempo_events.extend(track.tempos);
    }
    score.time_signatures.sort_by_key(|t| t.tick);
    score.time_signatures.dedup_by_key(|t| t.tick);
    if score.time_signatures.first().is_none_or(|t| t.tick != 0) {
        score.time_signatures.insert(
            0,
            TimeSignature {
                tick: 0,
                numerator: 4,
                denominator: 4,
            },
        );
    }
    score.tempo_events.sort_by_key(|t| t.tick);
    score.sort_notes();
    Ok((score, diag))
}

type OpenNote = (u64, u8, usize);

fn parse_track(
    data: &[u8],
    base: usize,
    diag: &mut MidiDiagnostics,
) -> Result<TrackData, MidiError> {
    let mut r = Reader { data, pos: 0, base };
    let mut out = TrackData::default();
    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    // (channel, pitch) -> queue of (onset tick, velocity, byte offset)
    let mut open: HashMap<(u8, u8), VecDeque<OpenNote>> = HashMap::new();
    let mut ended = false;

    while r.pos < data.len() {
        let delta = r.vlq()?;
        tick += u64::from(delta);
        let ev_offset = r.offset();
        let first = r.u8().ok_or(MidiError::TruncatedEvent(ev_offset))?;
        match first {
            0xff => {
                let kind = r.u8().ok_or(MidiError::TruncatedEvent(ev_offset))?;
                let len = r.vlq()? as usize;
                let payload = r.take(len).ok_or(MidiError::TruncatedEvent(ev_offset))?;
                match kind {
                    0x2f => {
                        ended = true;
                        break;
                    }
                    0x51 if len == 3 => out.tempos.push(TempoEvent {
                        tick,
                        micros_per_quarter: u32::from_be_bytes([
                            0, payload[0], payload[1], payload[2],
                        ]),
                    }),
                    0x58 if len >= 2 => {
                        if payload[1] > 7 || payload[0] == 0 {
                            diag.warn(ev_offset, "invalid time signature ignored");
                        } else {
                            out.time_signatures.push(TimeSignature {
                                tick,
                                numerator: payload[0],
                                denominator: 1 << payload[1],
                            });
                        }
                    }
                    0x00..=0x0f | 0x20 | 0x21 | 0x54 | 0x59 | 0x7f => {}
                    other => diag.warn(
                        ev_offset,
                        format!("skipping unknown meta event 0x{other:02x}"),
                    ),
                }
                running = None;
            }
            0xf0 | 0xf7 => {
                let len = r.vlq()? as usize;
                r.take(len).ok_or(MidiError::TruncatedEvent(ev_offset))?;
                running = None;
            }
            0xf1..=0xfe => {
                diag.warn(
                    ev_offset,
                    format!("system message 0x{first:02x} inside a file"),
                );
                let skip = match first {
                    0xf2 => 2,
                    0xf1 | 0xf3 => 1,
                    _ => 0,
                };
                r.take(skip).ok_or(MidiError::TruncatedEvent(ev_offset))?;
            }
            _ => {
                let (status, first_data) = if first & 0x80 != 0 {
                    running = Some(first);
                    (first, None)
                } else {
                    let status = running.ok_or(MidiError::MissingStatus {
                        offset: ev_offset,
                        byte: first,
                    })?;
                    (status, Some(first))
                };
                let n_data = match status & 0xf0 {
                    0xc0 | 0xd0 => 1,
                    _ => 2,
                };
                let mut d = [0u8; 2];
                for (i, slot) in d.iter_mut().take(n_data).enumerate() {
                    *slot = match (i, first_data) {
                        (0, Some(b)) => b,
                        _ => r.u8().ok_or(MidiError::TruncatedEvent(ev_offset))?,
                    };
                    if *slot & 0x80 != 0 {
                        return Err(MidiError::MissingStatus {
                            offset: ev_offset,
                            byte: *slot,
                        });
                    }
                }
                let channel = status & 0x0f;
                match status & 0xf0 {
                    0x90 if d[1] > 0 => {
                        open.entry((channel, d[0]))
                            .or_default()
                            .push_back((tick, d[1], ev_offset));
                    }
                    0x80 | 0x90 => {
                        let queue = open.get_mut(&(channel, d[0]));
                        match queue.and_then(|q| q.pop_front()) {
                            Some((start, velocity, _)) if tick > start => out.notes.push(Note {
                                pitch: d[0],
                                onset: start,
                                duration: tick - start,
                                velocity,
                                voice: channel,
                            }),
                            Some(_) => diag.warn(ev_offset, "zero-length note dropped"),
                            None => diag.warn(
                                ev_offset,
                                format!("note-off for pitch {} without note-on", d[0]),
                            ),
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    if !ended {
        diag.warn(base + r.pos, "track ends without end-of-track event");
    }
    let mut dangling: Vec<_> = open
        .into_iter()
        .flat_map(|((channel, pitch), q)| q.into_iter().map(move |e| (channel, pitch, e)))
        .collect();
    dangling.sort_by_key(|&(_, _, (_, _, off))| off);
    for (channel, pitch, (start, velocity, off)) in dangling {
        diag.warn(
            off,
            format!("note-on for pitch {pitch} never released; closed at track end"),
        );
        out.notes.push(Note {
            pitch,
            onset: start,
            duration: tick.saturating_sub(start).max(1),
            velocity,
            voice: channel,
        });
    }
    Ok(out)
}

fn push_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut buf = [0u8; 4];
    let mut i = 3;
    buf[i] = (value & 0x7f) as u8;
    value >>= 7;
    while value > 0 {
        i -= 1;
        buf[i] = (value & 0x7f) as u8 | 0x80;
        value >>= 7;
    }
    out.extend_from_slice(&buf[i..]);
}

fn push_chunk(out: &mut Vec<u8>, magic: &[u8; 4], body: &[u8]) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body);
}

fn encode_events(mut events: Vec<(u64, u8, Vec<u8>)>) -> Vec<u8> {
    // Sort key: tick, then priority (meta < note-off < note-on), then payload.
    events.sort();
    let mut body = Vec::new();
    let mut last = 0u64;
    for (tick, _, bytes) in events {
        push_vlq(&mut body, (tick - last) as u32);
        body.extend_from_slice(&bytes);
        last = tick;
    }
    push_vlq(&mut body, 0);
    body.extend_from_slice(&[0xff, 0x2f, 0x00]);
    body
}

/// Writes a format-1 file: a conductor track followed by one track per voice.
///
/// Voice `v` is written on channel `v % 16`.
pub fn write_midi(score: &Score) -> Vec<u8> {
    let ppq = if score.ppq == 0 {
        DEFAULT_PPQ
    } else {
        score.ppq
    };
    let voices = score
        .notes
        .iter()
        .map(|n| usize::from(n.voice) + 1)
        .max()
        .unwrap_or(0);

    let mut out = Vec::new();
    let mut header = Vec::new();
    header.extend_from_slice(&1u16.to_be_bytes());
    header.extend_from_slice(&((voices + 1) as u16).to_be_bytes());
    header.extend_from_slice(&ppq.to_be_bytes());
    push_chunk(&mut out, b"MThd", &header);

    let mut conductor = Vec::new();
    for ts in &score.time_signatures {
        let power = ts.denominator.max(1).trailing_zeros() as u8;
        conductor.push((
            ts.tick,
            0,
            vec![0xff, 0x58, 0x04, ts.numerator, power, 24, 8],
        ));
    }
    for t in &score.tempo_events {
        let b = t.micros_per_quarter.to_be_bytes();
        conductor.push((t.tick, 0, vec![0xff, 0x51, 0x03, b[1], b[2], b[3]]));
    }
    push_chunk(&mut out, b"MTrk", &encode_events(conductor));

    for voice in 0..voices {
        let channel = (voice % 16) as u8;
        let mut events = Vec::new();
        for n in score.notes.iter().filter(|n| usize::from(n.voice) == voice) {
            events.push((
                n.onset,
                2,
                vec![0x90 | channel, n.pitch & 0x7f, n.velocity.clamp(1, 127)],
            ));
            events.push((n.end(), 1, vec![0x80 | channel, n.pitch & 0x7f, 0]));
        }
        push_chunk(&mut out, b"MTrk", &encode_events(events));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(events: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        push_chunk(&mut out, b"MTrk", events);
        out
    }

    fn header(format: u16, tracks: u16, ppq: u16) -> Vec<u8> {
        let mut out = Vec::new();
        let mut h = Vec::new();
        h.extend_from_slice(&format.to_be_bytes());
        h.extend_from_slice(&tracks.to_be_bytes());
        h.extend_from_slice(&ppq.to_be_bytes());
        push_chunk(&mut out, b"MThd", &h);
        out
    }

    #[test]
    fn minimal_format0_quarter_note() {
        let mut file = header(0, 1, 480);
        file.extend(track(&[
            0x00, 0xff, 0x51, 0x03, 0x07, 0xa1, 0x20, // 120 BPM
            0x00, 0x90, 60, 100, //
            0x83, 0x60, 0x80, 60, 0, // delta 480
            0x00, 0xff, 0x2f, 0x00,
        ]));
        let (score, diag) = parse_midi(&file).unwrap();
        assert_eq!(score.notes, vec![Note::new(60, 0, 480, 100, 0)]);
        assert_eq!(score.tempo_events[0].micros_per_quarter, 500_000);
        assert_eq!(diag.format, 0);
        assert!(diag.warnings.is_empty(), "{:?}", diag.warnings);
    }

    #[test]
    fn empty_input_is_header_error() {
        assert_eq!(parse_midi(&[]), Err(MidiError::TruncatedHeader(0)));
        assert_eq!(parse_midi(b"RIFF0000000000"), Err(MidiError::BadMagic));
    }

    #[test]
    fn running_status_note_ons() {
        // byte-level oracle: one status byte, four note-ons using running status,
        // then velocity-0 note-ons (still running status) as note-offs
        let mut file = header(0, 1, 96);
        file.extend(track(&[
            0x00, 0x90, 60, 80, //
            0x00, 64, 80, //
            0x00, 67, 80, //
            0x00, 72, 80, //
            0x60, 60, 0, //
            0x00, 64, 0, //
            0x00, 67, 0, //
            0x00, 72, 0, //
            0x00, 0xff, 0x2f, 0x00,
        ]));
        let (score, diag) = parse_midi(&file).unwrap();
        let pitches: Vec<u8> = score.notes.iter().map(|n| n.pitch).collect();
        assert_eq!(pitches, vec![60, 64, 67, 72]);
        assert!(score.notes.iter().all(|n| n.duration == 96));
        assert!(diag.warnings.is_empty());
    }

    #[test]
    fn dangling_note_closed_at_track_end() {
        let mut file = header(0, 1, 96);
        file.extend(track(&[0x00, 0x90, 60, 80, 0x60, 0xff, 0x2f, 0x00]));
        let (score, diag) = parse_midi(&file).unwrap();
        assert_eq!(score.notes, vec![Note::new(60, 0, 96, 80, 0)]);
        assert_eq!(diag.warnings.len(), 1);
    }

    #[test]
    fn unknown_meta_skipped_with_warning() {
        let mut file = header(0, 1, 96);
        file.extend(track(&[
            0x00, 0xff, 0x60, 0x01, 0x00, 0x00, 0xff, 0x2f, 0x00,
        ]));
        let (_, diag) = parse_midi(&file).unwrap();
        assert_eq!(diag.warnings.len(), 1);
        assert!(diag.warnings[0].1.contains("0x60"));
    }

    #[test]
    fn fifo_pairing_for_overlapping_pitch() {
        let mut file = header(0, 1, 96);
        file.extend(track(&[
            0x00, 0x90, 60, 80, //
            0x10, 0x90, 60, 90, //
            0x10, 0x80, 60, 0, //
            0x10, 0x80, 60, 0, //
            0x00, 0xff, 0x2f, 0x00,
        ]));
        let (score, _) = parse_midi(&file).unwrap();
        assert_eq!(
            score.notes,
            vec![Note::new(60, 0, 32, 80, 0), Note::new(60, 16, 32, 90, 0)]
        );
    }

    #[test]
    fn format2_rejected() {
        let file = header(2, 0, 96);
        assert_eq!(parse_midi(&file), Err(MidiError::UnsupportedFormat(2)));
    }

    #[test]
    fn empty_score_writes_end_of_track_only() {
        let bytes = write_midi(&Score {
            time_signatures: vec![],
            ..Score::new(480)
        });
        let mut expected = header(1, 1, 480);
        expected.extend(track(&[0x00, 0xff, 0x2f, 0x00]));
        assert_eq!(bytes, expected);
        let (score, _) = parse_midi(&bytes).unwrap();
        assert!(score.notes.is_empty());
    }

    #[test]
    fn one_note_round_trip() {
        let mut score = Score::new(480);
        score.notes.push(Note::new(60, 0, 480, 100, 0));
        score.tempo_events.push(TempoEvent {
            tick: 0,
            micros_per_quarter: 500_000,
        });
        let (back, diag) = parse_midi(&write_midi(&score)).unwrap();
        assert_eq!(back, score);
        assert!(diag.warnings.is_empty());
        assert_eq!(diag.format, 1);
        assert_eq!(diag.track_count, 2);
    }

    #[test]
    fn vlq_encoding() {
        for (value, bytes) in [
            (0u32, vec![0x00]),
            (0x7f, vec![0x7f]),
            (0x80, vec![0x81, 0x00]),
            (0x3fff, vec![0xff, 0x7f]),
            (0x0fff_ffff, vec![0xff, 0xff, 0xff, 0x7f]),
        ] {
            let mut out = Vec::new();
            push_vlq(&mut out, value);
            assert_eq!(out, bytes);
            let mut r = Reader {
                data: &out,
                pos: 0,
                base: 0,
            };
            assert_eq!(r.vlq().unwrap(), value);
        }
    }
}
