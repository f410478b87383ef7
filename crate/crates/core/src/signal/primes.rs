//! Pitch to prime-bin table.

use serde::{Deserialize, Serialize};

use crate::model::PITCHES;

pub const LOWEST_PRIME: usize = 43;
pub const HIGHEST_PRIME: usize = 2063;
pub const MIN_GAP: usize = 3;

/// `bins[p]` is the spectral bin carrying MIDI pitch `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeMap {
    bins: Vec<usize>,
}

impl Default for PrimeMap {
    fn default() -> Self {
        Self::build(LOWEST_PRIME, HIGHEST_PRIME, MIN_GAP)
    }
}

impl PrimeMap {
    /// Primes in `[lowest, highest]`, thinned so that consecutive kept primes
    /// differ by at least `min_gap`, then sampled at 128 evenly spaced indices
    /// (both ends included).
    ///
    /// Panics if fewer than 128 primes survive the gap filter.
    pub fn build(lowest: usize, highest: usize, min_gap: usize) -> Self {
        let mut kept: Vec<usize> = Vec::new();
        for p in primes_up_to(highest).into_iter().filter(|&p| p >= lowest) {
            if kept.last().is_none_or(|&last| p - last >= min_gap) {
                kept.push(p);
            }
        }
        assert!(
            kept.len() >= PITCHES,
            "only {} primes in [{lowest}, {highest}] with gap {min_gap}",
            kept.len()
        );
        let n = kept.len() - 1;
        let last = PITCHES - 1;
        let bins = (0..PITCHES)
            .map(|i| kept[(i * n + last / 2) / last])
            .collect();
        Self { bins }
    }

    pub fn bin(&self, pitch: u8) -> usize {
        self.bins[usize::from(pitch)]
    }

    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn max_bin(&self) -> usize {
        *self.bins.last().expect("prime map is never empty")
    }
}

/// Sieve of Eratosthenes.
pub fn primes_up_to(n: usize) -> Vec<usize> {
    if n < 2 {
        return Vec::new();
    }
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if composite[i] {
            continue;
        }
        out.push(i);
        let mut j = i * i;
        while j <= n {
            composite[j] = true;
            j += i;
        }
    }
    out
}
