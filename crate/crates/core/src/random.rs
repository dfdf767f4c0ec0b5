//! Seeded random streams.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Generator used throughout the toolkit.
pub type SimRng = ChaCha8Rng;

/// Derives independent ChaCha streams from a master seed and a label.
///
/// The 256-bit key holds the master seed, a hash of the label and a
/// sub-stream tag; the ChaCha stream id carries the trial index, so no two
/// `(label, tag, index)` triples share keystream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedSequence {
    master: u64,
    label: u64,
}

impl SeedSequence {
    pub fn new(master: u64, label: &str) -> Self {
        Self { master, label: fnv1a(label.as_bytes()) }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn stream(&self, tag: u64, index: u64) -> SimRng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master.to_le_bytes());
        key[8..16].copy_from_slice(&self.label.to_le_bytes());
        key[16..24].copy_from_slice(&tag.to_le_bytes());
        key[24..].copy_from_slice(b"shapegai");
        let mut rng = SimRng::from_seed(key);
        rng.set_stream(index);
        rng
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * core::f64::consts::FRAC_1_SQRT_2
}
