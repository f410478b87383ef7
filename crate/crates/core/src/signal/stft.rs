//! Short-time Fourier transform with least-squares overlap-add inversion.
//!
//! Frames start at multiples of `hop`; the `win_length` window sits at the
//! start of each `n_fft` frame and the rest of the frame is zero padding.
//! Phases are referenced to each frame's own start.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::SignalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Rectangular,
    Hann,
}

impl WindowKind {
    pub fn samples(self, len: usize) -> Vec<f64> {
        match self {
            WindowKind::Rectangular => vec![1.0; len],
            // periodic Hann
            WindowKind::Hann => (0..len)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectralConfig {
    pub n_fft: usize,
    pub win_length: usize,
    pub hop: usize,
    pub window: WindowKind,
    /// Fraction of the unit-activation response a bin must reach to count as on.
    pub detection_threshold: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            n_fft: 4128,
            win_length: 2048,
            hop: 2048,
            window: WindowKind::Rectangular,
            detection_threshold: 0.5,
        }
    }
}

impl SpectralConfig {
    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Samples produced for `frames` frames.
    pub fn signal_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            (frames - 1) * self.hop + self.win_length
        }
    }

    pub fn validate(&self, max_bin: usize) -> Result<(), SignalError> {
        let problem = if self.hop == 0 {
            Some("hop must be at least 1".to_string())
        } else if self.win_length == 0 || self.win_length > self.n_fft {
            Some(format!(
                "win_length {} must be in 1..={}",
                self.win_length, self.n_fft
            ))
        } else if self.n_fft < 2 * max_bin + 2 {
            Some(format!(
                "n_fft {} cannot hold bin {max_bin} (needs at least {})",
                self.n_fft,
                2 * max_bin + 2
            ))
        } else if !(self.detection_threshold > 0.0 && self.detection_threshold < 1.0) {
            Some(format!(
                "detection_threshold {} must be in (0, 1)",
                self.detection_threshold
            ))
        } else {
            None
        };
        match problem {
            Some(msg) => Err(SignalError::InvalidConfig(msg)),
            None => Ok(()),
        }
    }
}

/// One-sided spectrogram: `bins` rows by `frames` columns, stored frame by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    bins: usize,
    frames: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn filled(bins: usize, frames: usize, value: Complex64) -> Self {
        Self {
            bins,
            frames,
            data: vec![value; bins * frames],
        }
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn get(&self, bin: usize, frame: usize) -> Complex64 {
        self.data[frame * self.bins + bin]
    }

    pub fn set(&mut self, bin: usize, frame: usize, value: Complex64) {
        self.data[frame * self.bins + bin] = value;
    }

    pub fn frame(&self, frame: usize) -> &[Complex64] {
        &self.data[frame * self.bins..(frame + 1) * self.bins]
    }

    fn frame_mut(&mut self, frame: usize) -> &mut [Complex64] {
        &mut self.data[frame * self.bins..(frame + 1) * self.bins]
    }
}

/// Planned transforms for one configuration; cheap to share across threads.
#[derive(Clone)]
pub struct Stft {
    cfg: SpectralConfig,
    window: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("cfg", &self.cfg).finish()
    }
}

impl Stft {
    pub fn new(cfg: SpectralConfig) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            cfg,
            window: cfg.window.samples(cfg.win_length),
            forward: planner.plan_fft_forward(cfg.n_fft),
            inverse: planner.plan_fft_inverse(cfg.n_fft),
        }
    }

    pub fn config(&self) -> &SpectralConfig {
        &self.cfg
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Sum of squared windows covering each sample of a `len`-sample signal.
    fn envelope(&self, frames: usize, len: usize) -> Vec<f64> {
        let mut env = vec![0.0; len];
        for t in 0..frames {
            let start = t * self.cfg.hop;
            for (m, w) in self.window.iter().enumerate() {
                if let Some(e) = env.get_mut(start + m) {
                    *e += w * w;
                }
            }
        }
        env
    }

    /// Overlap-add synthesis, normalised by the squared-window envelope.
    ///
    /// Each one-sided frame is mirrored conjugate-symmetrically before the
    /// inverse DFT; imaginary parts at DC and Nyquist are dropped so the
    /// output is real.
    pub fn inverse(&self, m: &ComplexMatrix) -> Result<Vec<f64>, SignalError> {
        let n = self.cfg.n_fft;
        if m.bins() != self.cfg.bins() {
            return Err(SignalError::ShapeMismatch {
                expected: self.cfg.bins(),
                actual: m.bins(),
            });
        }
        let len = self.cfg.signal_len(m.frames());
        let mut out = vec![0.0; len];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.inverse.get_inplace_scratch_len()];
        let half = n / 2;
        for t in 0..m.frames() {
            let frame = m.frame(t);
            buf[0] = Complex64::new(frame[0].re, 0.0);
            for k in 1..half {
                buf[k] = frame[k];
                buf[n - k] = frame[k].conj();
            }
            if n.is_multiple_of(2) {
                buf[half] = Complex64::new(frame[half].re, 0.0);
            } else {
                buf[half] = frame[half];
                buf[n - half] = frame[half].conj();
            }
            self.inverse.process_with_scratch(&mut buf, &mut scratch);
            let start = t * self.cfg.hop;
            for (i, w) in self.window.iter().enumerate() {
                out[start + i] += w * buf[i].re / n as f64;
            }
        }
        let env = self.envelope(m.frames(), len);
        for (x, e) in out.iter_mut().zip(env) {
            *x = if e > f64::EPSILON { *x / e } else { 0.0 };
        }
        Ok(out)
    }

    /// Number of full frames in a signal, or an error if there is not even one.
    pub fn frame_count(&self, len: usize) -> Result<usize, SignalError> {
        if len < self.cfg.win_length {
            return Err(SignalError::TooShort {
                len,
                win_length: self.cfg.win_length,
            });
        }
        Ok((len - self.cfg.win_length) / self.cfg.hop + 1)
    }

    pub fn forward(&self, x: &[f64]) -> Result<ComplexMatrix, SignalError> {
        let frames = self.frame_count(x.len())?;
        let n = self.cfg.n_fft;
        let mut m = ComplexMatrix::filled(self.cfg.bins(), frames, Complex64::new(0.0, 0.0));
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.forward.get_inplace_scratch_len()];
        for t in 0..frames {
            let start = t * self.cfg.hop;
            buf.fill(Complex64::new(0.0, 0.0));
            for (i, w) in self.window.iter().enumerate() {
                buf[i] = Complex64::new(w * x[start + i], 0.0);
            }
            self.forward.process_with_scratch(&mut buf, &mut scratch);
            m.frame_mut(t).copy_from_slice(&buf[..self.cfg.bins()]);
        }
        Ok(m)
    }
}

pub fn inverse_stft(m: &ComplexMatrix, cfg: &SpectralConfig) -> Result<Vec<f64>, SignalError> {
    Stft::new(*cfg).inverse(m)
}

pub fn forward_stft(x: &[f64], cfg: &SpectralConfig) -> Result<ComplexMatrix, SignalError> {
    Stft::new(*cfg).forward(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small(hop: usize, window: WindowKind) -> SpectralConfig {
        SpectralConfig {
            n_fft: 64,
            win_length: 32,
            hop,
            window,
            detection_threshold: 0.5,
        }
    }

    #[test]
    fn zero_matrix_gives_silence() {
        let cfg = SpectralConfig::default();
        let m = ComplexMatrix::filled(cfg.bins(), 3, Complex64::new(0.0, 0.0));
        let y = inverse_stft(&m, &cfg).unwrap();
        assert_eq!(y.len(), 3 * 2048);
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_frame_matches_direct_inverse_dft() {
        let cfg = SpectralConfig::default();
        let k = 101;
        let mut m = ComplexMatrix::filled(cfg.bins(), 1, Complex64::new(0.0, 0.0));
        m.set(k, 0, Complex64::new(1.0, 0.0));
        let y = inverse_stft(&m, &cfg).unwrap();
        let n = cfg.n_fft as f64;
        for (i, v) in y.iter().enumerate() {
            // direct inverse DFT of X[k] = X[n-k] = 1
            let expected = 2.0 / n * (2.0 * PI * k as f64 * i as f64 / n).cos();
            assert!(
                (v - expected).abs() < 1e-12,
                "sample {i}: {v} vs {expected}"
            );
        }
    }

    #[test]
    fn silence_has_zero_spectrum() {
        let cfg = SpectralConfig::default();
        let m = forward_stft(&vec![0.0; 4096], &cfg).unwrap();
        assert_eq!(m.frames(), 2);
        assert!((0..m.frames()).all(|t| m.frame(t).iter().all(|c| c.norm() == 0.0)));
    }

    #[test]
    fn pure_bin_cosine_peaks_at_its_bin() {
        let n = 4128;
        let cfg = SpectralConfig {
            win_length: n,
            hop: n,
            ..Default::default()
        };
        let k = 331;
        let x: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * (k * i) as f64 / n as f64).cos())
            .collect();
        let m = forward_stft(&x, &cfg).unwrap();
        let mags: Vec<f64> = m.frame(0).iter().map(|c| c.norm()).collect();
        let peak = (0..mags.len())
            .max_by(|&a, &b| mags[a].total_cmp(&mags[b]))
            .unwrap();
        assert_eq!(peak, k);
        assert!((mags[k] - n as f64 / 2.0).abs() < 1e-6);
        assert!(mags.iter().enumerate().all(|(i, &v)| i == k || v < 1e-6));
    }

    #[test]
    fn too_short_signal() {
        let cfg = SpectralConfig::default();
        assert!(matches!(
            forward_stft(&[0.0; 100], &cfg),
            Err(SignalError::TooShort { .. })
        ));
    }

    #[test]
    fn wrong_row_count() {
        let cfg = SpectralConfig::default();
        let m = ComplexMatrix::filled(10, 1, Complex64::new(0.0, 0.0));
        assert!(matches!(
            inverse_stft(&m, &cfg),
            Err(SignalError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn least_squares_inverse_recovers_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (hop, window) in [
            (1, WindowKind::Rectangular),
            (8, WindowKind::Hann),
            (32, WindowKind::Rectangular),
        ] {
            let cfg = small(hop, window);
            let frames = 9;
            let x: Vec<f64> = (0..cfg.signal_len(frames))
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let y = inverse_stft(&forward_stft(&x, &cfg).unwrap(), &cfg).unwrap();
            let env = Stft::new(cfg).envelope(frames, x.len());
            for i in 0..x.len() {
                if env[i] > f64::EPSILON {
                    assert!((x[i] - y[i]).abs() < 1e-12, "hop {hop} sample {i}");
                }
            }
        }
    }
}
