//! 16-bit PCM mono RIFF/WAVE writer and reader.

use super::SignalError;

/// Playback rate used when none is given; bins are not tied to any physical frequency.
pub const DEFAULT_SAMPLE_RATE: u32 = 8192;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Wav {
    pub sample_rate: u32,
    pub samples: Vec<i16>,
}

/// Peak-normalises to full scale and writes a mono 16-bit PCM file.
pub fn export_wav(samples: &[f64], sample_rate: u32) -> Vec<u8> {
    let peak = samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = if peak > 0.0 {
        f64::from(i16::MAX) / peak
    } else {
        0.0
    };
    let pcm: Vec<i16> = samples.iter().map(|x| (x * scale).round() as i16).collect();
    write_pcm16(&pcm, sample_rate)
}

pub fn write_pcm16(pcm: &[i16], sample_rate: u32) -> Vec<u8> {
    let data_len = (pcm.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + pcm.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in pcm {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

/// Reads a mono 16-bit PCM file, skipping chunks other than `fmt ` and `data`.
pub fn read_wav(bytes: &[u8]) -> Result<Wav, SignalError> {
    let bad = |msg: &str| SignalError::Wav(msg.to_string());
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("missing RIFF/WAVE header"));
    }
    let mut pos = 12;
    let mut sample_rate = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body = bytes
            .get(pos + 8..pos + 8 + len)
            .ok_or_else(|| bad("truncated chunk"))?;
        match id {
            b"fmt " => {
                if len < 16 {
                    return Err(bad("fmt chunk too short"));
                }
                let u16_at = |i: usize| u16::from_le_bytes([body[i], body[i + 1]]);
                if u16_at(0) != 1 || u16_at(2) != 1 || u16_at(14) != 16 {
                    return Err(bad("only 16-bit PCM mono is supported"));
                }
                sample_rate = Some(u32::from_le_bytes(body[4..8].try_into().unwrap()));
            }
            b"data" => {
                let rate = sample_rate.ok_or_else(|| bad("data chunk before fmt chunk"))?;
                let samples = body
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]))
                    .collect();
                return Ok(Wav {
                    sample_rate: rate,
                    samples,
                });
            }
            _ => {}
        }
        pos += 8 + len + (len & 1);
    }
    Err(bad("no data chunk"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silence_is_zeros() {
        let bytes = export_wav(&[0.0; 100], DEFAULT_SAMPLE_RATE);
        assert_eq!(bytes.len(), 44 + 200);
        let wav = read_wav(&bytes).unwrap();
        assert_eq!(wav.samples, vec![0; 100]);
    }

    #[test]
    fn header_constants() {
        let tone: Vec<f64> = (0..8192)
            .map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 8192.0).sin())
            .collect();
        let b = export_wav(&tone, 8192);
        assert_eq!(&b[0..4], b"RIFF");
        assert_eq!(&b[8..12], b"WAVE");
        assert_eq!(u16::from_le_bytes([b[20], b[21]]), 1);
        assert_eq!(u16::from_le_bytes([b[22], b[23]]), 1);
        assert_eq!(u16::from_le_bytes([b[34], b[35]]), 16);
        assert_eq!(u32::from_le_bytes(b[24..28].try_into().unwrap()), 8192);
        let wav = read_wav(&b).unwrap();
        assert_eq!(
            wav.samples.iter().map(|s| s.unsigned_abs()).max(),
            Some(i16::MAX as u16)
        );
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_wav(b"nope").is_err());
        assert!(read_wav(b"RIFF\0\0\0\0WAVE").is_err());
    }
}
