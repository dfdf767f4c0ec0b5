//! Gray-mapped square constellations with unit average energy.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Qpsk,
    Qam16,
}

const QPSK_LEVEL: f64 = core::f64::consts::FRAC_1_SQRT_2;
// 1 / sqrt(10)
const QAM16_UNIT: f64 = 0.316_227_766_016_837_94;

impl Modulation {
    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Qpsk => "QPSK",
            Modulation::Qam16 => "16QAM",
        }
    }

    fn axis_level(self, bits: &[u8]) -> f64 {
        match self {
            Modulation::Qpsk => {
                if bits[0] == 0 {
                    -QPSK_LEVEL
                } else {
                    QPSK_LEVEL
                }
            }
            Modulation::Qam16 => {
                let level = match (bits[0], bits[1]) {
                    (0, 0) => -3.0,
                    (0, _) => -1.0,
                    (_, 0) => 3.0,
                    _ => 1.0,
                };
                level * QAM16_UNIT
            }
        }
    }

    fn axis_bits(self, x: f64, out: &mut Vec<u8>) {
        match self {
            Modulation::Qpsk => out.push(u8::from(x >= 0.0)),
            Modulation::Qam16 => {
                let t = 2.0 * QAM16_UNIT;
                let pair = if x < -t {
                    [0, 0]
                } else if x < 0.0 {
                    [0, 1]
                } else if x < t {
                    [1, 1]
                } else {
                    [1, 0]
                };
                out.extend_from_slice(&pair);
            }
        }
    }

    /// Maps bits (in-phase bits first, then quadrature) to symbols.
    pub fn modulate(self, bits: &[u8]) -> Result<Vec<Complex64>> {
        let k = self.bits_per_symbol();
        if !bits.len().is_multiple_of(k) {
            return Err(Error::DimensionMismatch { expected: bits.len().div_ceil(k) * k, found: bits.len() });
        }
        if bits.iter().any(|b| *b > 1) {
            return Err(Error::OutOfRange("bits must be 0 or 1"));
        }
        let h = k / 2;
        Ok(bits.chunks_exact(k).map(|c| Complex64::new(self.axis_level(&c[..h]), self.axis_level(&c[h..]))).collect())
    }

    /// Nearest-point hard decisions.
    pub fn demodulate(self, symbols: &[Complex64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(symbols.len() * self.bits_per_symbol());
        for s in symbols {
            self.axis_bits(s.re, &mut out);
            self.axis_bits(s.im, &mut out);
        }
        out
    }

    /// Every constellation point, indexed by its bit label read MSB first.
    pub fn constellation(self) -> Vec<Complex64> {
        let k = self.bits_per_symbol();
        (0..1usize << k)
            .map(|label| {
                let bits: Vec<u8> = (0..k).rev().map(|i| ((label >> i) & 1) as u8).collect();
                self.modulate(&bits).expect("label width matches")[0]
            })
            .collect()
    }
}
