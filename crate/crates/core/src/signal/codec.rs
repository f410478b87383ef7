//! Piano-roll to waveform and back.
//!
//! Each roll column becomes one spectral frame. Pitch `p` lights bin
//! `map.bin(p)` with real part 1; every bin of every frame carries an
//! imaginary part of 1. The inverse STFT of that matrix is the encoding.
//!
//! Decoding analyses the waveform with the same framing and removes the
//! imaginary carrier: its analysis spectrum (that of an empty roll's
//! encoding) is fitted per frame by least squares on odd bins no pitch maps
//! to, where activations barely leak, and the fitted multiple is subtracted.
//! A cell is active when the remaining magnitude at its prime bin reaches
//! `detection_threshold` times the closed-form response of a unit
//! activation. The fitted gain is 1 for an encoding, 0 for silence and 2 for
//! the sum of two encodings. With non-overlapping frames
//! (`hop >= win_length`) decoding inverts encoding.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::primes::PrimeMap;
use super::stft::{ComplexMatrix, SpectralConfig, Stft};
use super::SignalError;
use crate::model::{PianoRoll, PITCHES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRep {
    pub samples: Vec<f64>,
    pub config: SpectralConfig,
    /// Ticks per roll column, carried so decoding restores the roll's grid.
    pub quantum: u64,
}

impl SignalRep {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.samples.iter().map(|&x| x as f32).collect()
    }
}

/// Real part from the roll, imaginary part 1 everywhere.
pub fn roll_to_complex(roll: &PianoRoll, map: &PrimeMap, cfg: &SpectralConfig) -> ComplexMatrix {
    let mut m = ComplexMatrix::filled(cfg.bins(), roll.steps(), Complex64::new(0.0, 1.0));
    for t in 0..roll.steps() {
        let mut column = roll.columns()[t];
        while column != 0 {
            let pitch = column.trailing_zeros() as u8;
            m.set(map.bin(pitch), t, Complex64::new(1.0, 1.0));
            column &= column - 1;
        }
    }
    m
}

/// Encoder/decoder bound to one configuration and prime map.
#[derive(Debug)]
pub struct SignalCodec {
    map: PrimeMap,
    stft: Stft,
    reference: Vec<f64>,
    /// Odd bins that carry no pitch; used to fit the carrier gain.
    probe_bins: Vec<usize>,
    carriers: Mutex<HashMap<usize, Arc<Carrier>>>,
}

/// Carrier analysis per frame, at the probe bins and at the prime bins.
#[derive(Debug)]
struct Carrier {
    probe: Vec<Vec<Complex64>>,
    primes: Vec<Vec<Complex64>>,
    probe_energy: Vec<f64>,
}

impl SignalCodec {
    pub fn new(cfg: SpectralConfig, map: PrimeMap) -> Result<Self, SignalError> {
        cfg.validate(map.max_bin())?;
        let stft = Stft::new(cfg);
        let weights = steady_weights(stft.window(), cfg.hop);
        let reference = map
            .bins()
            .iter()
            .map(|&k| unit_response(&weights, k, cfg.n_fft).norm())
            .collect();
        let probe_bins = (1..cfg.bins() - 1)
            .step_by(2)
            .filter(|k| map.bins().binary_search(k).is_err())
            .collect();
        Ok(Self {
            map,
            stft,
            reference,
            probe_bins,
            carriers: Mutex::new(HashMap::new()),
        })
    }

    pub fn config(&self) -> &SpectralConfig {
        self.stft.config()
    }

    pub fn map(&self) -> &PrimeMap {
        &self.map
    }

    /// Magnitude a single active cell produces at its own bin, per pitch.
    pub fn reference_magnitudes(&self) -> &[f64] {
        &self.reference
    }

    pub fn encode(&self, roll: &PianoRoll) -> Result<SignalRep, SignalError> {
        let m = roll_to_complex(roll, &self.map, self.config());
        Ok(SignalRep {
            samples: self.stft.inverse(&m)?,
            config: *self.config(),
            quantum: roll.quantum(),
        })
    }

    fn carrier(&self, frames: usize) -> Result<Arc<Carrier>, SignalError> {
        if let Some(c) = self
            .carriers
            .lock()
            .expect("carrier cache poisoned")
            .get(&frames)
        {
            return Ok(c.clone());
        }
        let empty = PianoRoll::new(frames, 1);
        let spectrum = self.stft.forward(&self.encode(&empty)?.samples)?;
        let probe: Vec<Vec<Complex64>> = (0..frames)
            .map(|t| {
                self.probe_bins
                    .iter()
                    .map(|&k| spectrum.get(k, t))
                    .collect()
            })
            .collect();
        let primes = (0..frames)
            .map(|t| {
                self.map
                    .bins()
                    .iter()
                    .map(|&k| spectrum.get(k, t))
                    .collect()
            })
            .collect();
        let probe_energy = probe
            .iter()
            .map(|f| f.iter().map(|c| c.norm_sqr()).sum())
            .collect();
        let c = Arc::new(Carrier {
            probe,
            primes,
            probe_energy,
        });
        self.carriers
            .lock()
            .expect("carrier cache poisoned")
            .insert(frames, c.clone());
        Ok(c)
    }

    /// Least-squares multiple of the carrier present in each frame.
    pub fn carrier_gains(&self, samples: &[f64]) -> Result<Vec<Complex64>, SignalError> {
        let spectrum = self.stft.forward(samples)?;
        let carrier = self.carrier(spectrum.frames())?;
        Ok(self.fit_gains(&spectrum, &carrier))
    }

    fn fit_gains(&self, spectrum: &ComplexMatrix, carrier: &Carrier) -> Vec<Complex64> {
        (0..spectrum.frames())
            .map(|t| {
                let dot: Complex64 = self
                    .probe_bins
                    .iter()
                    .zip(&carrier.probe[t])
                    .map(|(&k, c)| c.conj() * spectrum.get(k, t))
                    .sum();
                if carrier.probe_energy[t] > 0.0 {
                    dot / carrier.probe_energy[t]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect()
    }

    /// Carrier-compensated magnitude at each (frame, pitch), divided by the
    /// unit-activation reference. Row-major by frame.
    pub fn activation_ratios(&self, samples: &[f64]) -> Result<(usize, Vec<f64>), SignalError> {
        let cfg = self.config();
        let frames = self.stft.frame_count(samples.len())?;
        let expected_len = cfg.signal_len(frames);
        if expected_len != samples.len() {
            return Err(SignalError::FrameMismatch {
                frames,
                expected_len,
                actual_len: samples.len(),
            });
        }
        let spectrum = self.stft.forward(samples)?;
        let carrier = self.carrier(frames)?;
        let gains = self.fit_gains(&spectrum, &carrier);
        let mut ratios = Vec::with_capacity(frames * PITCHES);
        for (t, &gain) in gains.iter().enumerate() {
            for (p, &k) in self.map.bins().iter().enumerate() {
                let residual = spectrum.get(k, t) - gain * carrier.primes[t][p];
                ratios.push(residual.norm() / self.reference[p]);
            }
        }
        Ok((frames, ratios))
    }

    pub fn decode(&self, sig: &SignalRep) -> Result<PianoRoll, SignalError> {
        self.decode_samples(&sig.samples, sig.quantum)
    }

    pub fn decode_samples(&self, samples: &[f64], quantum: u64) -> Result<PianoRoll, SignalError> {
        let (frames, ratios) = self.activation_ratios(samples)?;
        let threshold = self.config().detection_threshold;
        let mut roll = PianoRoll::new(frames, quantum);
        for t in 0..frames {
            for p in 0..PITCHES {
                if ratios[t * PITCHES + p] >= threshold {
                    roll.set(p as u8, t, true);
                }
            }
        }
        Ok(roll)
    }

    /// Decodes a signal that must contain exactly `steps` frames.
    pub fn decode_steps(
        &self,
        samples: &[f64],
        steps: usize,
        quantum: u64,
    ) -> Result<PianoRoll, SignalError> {
        let expected_len = self.config().signal_len(steps);
        if samples.len() != expected_len {
            return Err(SignalError::FrameMismatch {
                frames: steps,
                expected_len,
                actual_len: samples.len(),
            });
        }
        self.decode_samples(samples, quantum)
    }
}

/// Effective per-sample weight `w^2 / envelope` seen by analysis after
/// synthesis, for a frame far from the signal edges.
fn steady_weights(window: &[f64], hop: usize) -> Vec<f64> {
    let len = window.len();
    (0..len)
        .map(|m| {
            let mut env = 0.0;
            let mut j = m % hop;
            while j < len {
                env += window[j] * window[j];
                j += hop;
            }
            if env > f64::EPSILON {
                window[m] * window[m] / env
            } else {
                0.0
            }
        })
        .collect()
}

/// Analysis of a unit real activation at bin `k`: the synthesised
/// `(2/N) cos(2 pi k m / N)` correlated with `e^{-2 pi i k m / N}` under the
/// effective weights, i.e. `(1/N) sum_m g(m) (1 + e^{-4 pi i k m / N})`.
fn unit_response(weights: &[f64], k: usize, n_fft: usize) -> Complex64 {
    let n = n_fft as f64;
    let step = -4.0 * PI * k as f64 / n;
    let sum: Complex64 = weights
        .iter()
        .enumerate()
        .map(|(m, &g)| g * (Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, step * m as f64)))
        .sum();
    sum / n
}

pub fn encode_signal(
    roll: &PianoRoll,
    map: &PrimeMap,
    cfg: &SpectralConfig,
) -> Result<SignalRep, SignalError> {
    SignalCodec::new(*cfg, map.clone())?.encode(roll)
}

pub fn decode_signal(
    sig: &SignalRep,
    map: &PrimeMap,
    cfg: &SpectralConfig,
) -> Result<PianoRoll, SignalError> {
    SignalCodec::new(*cfg, map.clone())?.decode(sig)
}
