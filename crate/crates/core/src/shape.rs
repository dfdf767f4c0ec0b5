//! Random vector quantization of unit-norm complex shapes and the sphere
//! geometry behind its distortion law.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::quad::integrate;
use crate::random::{complex_gaussian, SeedSequence};
use crate::special::{beta_reg, ln_beta, ln_gamma};

const UNIT_NORM_TOL: f64 = 1e-6;

/// Volume of the unit ball in `R^n`, `pi^(n/2) / Gamma(n/2 + 1)`.
pub fn ball_coefficient(n: u32) -> f64 {
    let h = n as f64 / 2.0;
    libm::exp(h * libm::log(PI) - ln_gamma(h + 1.0))
}

/// Surface area of the unit sphere in `R^n`.
pub fn sphere_area(n: u32) -> f64 {
    n as f64 * ball_coefficient(n)
}

/// Angle subtended by a chord of squared length `b` on the unit sphere.
pub fn angle_from_sqdist(b: f64) -> Result<f64> {
    if !(0.0..=4.0).contains(&b) {
        return Err(Error::OutOfRange("squared distance must lie in [0, 4]"));
    }
    Ok(libm::acos((1.0 - 0.5 * b).clamp(-1.0, 1.0)))
}

/// Area of a cap of half-angle `theta` on the unit sphere of `C^M`.
pub fn cap_area(theta: f64, m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::OutOfRange("dimension must be at least 1"));
    }
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::OutOfRange("cap angle must lie in [0, pi]"));
    }
    let power = 2 * m as i32 - 2;
    let integral = integrate(|phi| libm::pow(libm::sin(phi), power as f64), 0.0, theta, 1e-12);
    Ok((2 * m - 1) as f64 * ball_coefficient(2 * m - 1) * integral)
}

/// Constants of the random-VQ distortion analysis for dimension `M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeDistortionModel {
    pub m: u32,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub ks: f64,
}

pub fn ks_constant(m: u32) -> Result<ShapeDistortionModel> {
    if m == 0 {
        return Err(Error::OutOfRange("dimension must be at least 1"));
    }
    let n = (2 * m - 1) as f64;
    let k1 = n * ball_coefficient(2 * m - 1) / (2.0 * m as f64 * ball_coefficient(2 * m));
    let k2 = k1 / n;
    let k3 = libm::pow(k2, -2.0 / n);
    let mf = m as f64;
    let ln_ratio =
        (n / 2.0) * libm::log(PI) + ln_gamma(mf) - libm::log(2.0) - mf * libm::log(PI) - ln_gamma(n / 2.0 + 1.0);
    let ks = libm::exp(-2.0 / n * ln_ratio);
    Ok(ShapeDistortionModel { m, k1, k2, k3, ks })
}

/// `D_s = K_s 2^(-2 B_s / (2M - 1))`.
pub fn analytic_shape_distortion(m: u32, bits: u32) -> Result<f64> {
    let model = ks_constant(m)?;
    Ok(model.ks * libm::exp2(-2.0 * bits as f64 / (2 * m - 1) as f64))
}

/// Expected minimum squared distance under the small-angle CCDF truncated
/// at `theta = 1`, i.e. `2 int_0^1 (1 - K2 theta^(2M-1))^N theta dtheta`.
///
/// Evaluated as `N B(N, (2M+1)/(2M-1)) K3 I_K2(2/(2M-1), N+1)` in the log
/// domain, which is exact and free of the cancellation in the binomial
/// expansion.
pub fn shape_distortion_series(m: u32, bits: u32) -> Result<f64> {
    let model = ks_constant(m)?;
    if bits >= 63 {
        return Err(Error::OutOfRange("too many shape bits"));
    }
    let n = libm::exp2(bits as f64);
    let a = 2.0 / (2 * m - 1) as f64;
    let incomplete = if model.k2 >= 1.0 { 1.0 } else { beta_reg(a, n + 1.0, model.k2) };
    Ok(shape_distortion_closed_form_n(&model, n) * incomplete)
}

/// `N B(N, (2M+1)/(2M-1)) K3`: the same integral carried to the root of
/// `1 - K2 theta^(2M-1)` instead of stopping at `theta = 1`.
pub fn shape_distortion_closed_form(m: u32, bits: u32) -> Result<f64> {
    let model = ks_constant(m)?;
    if bits >= 63 {
        return Err(Error::OutOfRange("too many shape bits"));
    }
    Ok(shape_distortion_closed_form_n(&model, libm::exp2(bits as f64)))
}

fn shape_distortion_closed_form_n(model: &ShapeDistortionModel, n: f64) -> f64 {
    let b = 1.0 + 2.0 / (2 * model.m - 1) as f64;
    libm::exp(libm::log(n) + ln_beta(n, b)) * model.k3
}

/// `Gamma(y + t) / Gamma(y + 1)` and Kershaw's upper bound `(y + t/2)^(t - 1)`.
pub fn kershaw_pair(y: f64, t: f64) -> (f64, f64) {
    let ratio = libm::exp(ln_gamma(y + t) - ln_gamma(y + 1.0));
    let bound = libm::pow(y + 0.5 * t, t - 1.0);
    (ratio, bound)
}

/// `Pr[min_i |s - c_i|^2 >= b]` for `N` independent uniform codewords.
pub fn exact_min_ccdf(b: f64, m: u32, codewords: u64) -> Result<f64> {
    let theta = angle_from_sqdist(b)?;
    if codewords == 0 {
        return Err(Error::OutOfRange("codebook must be nonempty"));
    }
    if b == 4.0 {
        return Ok(0.0);
    }
    let fraction = (cap_area(theta, m)? / sphere_area(2 * m)).clamp(0.0, 1.0);
    Ok(pow_one_minus(fraction, codewords))
}

/// Small-angle CCDF `(1 - K2 theta^(2M-1))^N`, clamped at zero.
pub fn approx_min_ccdf(b: f64, m: u32, codewords: u64) -> Result<f64> {
    let theta = angle_from_sqdist(b)?;
    approx_in_theta(theta, m, codewords)
}

/// Small-angle CCDF with the chord substitution also linearized,
/// `theta ~ sqrt(b)`.
pub fn approx_min_ccdf_linear(b: f64, m: u32, codewords: u64) -> Result<f64> {
    angle_from_sqdist(b)?;
    approx_in_theta(libm::sqrt(b), m, codewords)
}

/// [`approx_min_ccdf_linear`] truncated to `theta <= 1`.
pub fn approx_min_ccdf_truncated(b: f64, m: u32, codewords: u64) -> Result<f64> {
    angle_from_sqdist(b)?;
    if b > 1.0 {
        return Ok(0.0);
    }
    approx_in_theta(libm::sqrt(b), m, codewords)
}

fn approx_in_theta(theta: f64, m: u32, codewords: u64) -> Result<f64> {
    if codewords == 0 {
        return Err(Error::OutOfRange("codebook must be nonempty"));
    }
    let model = ks_constant(m)?;
    let inner = model.k2 * libm::pow(theta, (2 * m - 1) as f64);
    Ok(pow_one_minus(inner.clamp(0.0, 1.0), codewords))
}

fn pow_one_minus(x: f64, n: u64) -> f64 {
    if x >= 1.0 {
        return 0.0;
    }
    libm::exp(n as f64 * libm::log1p(-x))
}

/// `2^B_s` unit vectors drawn uniformly from the complex sphere in `C^M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeCodebook {
    m: usize,
    bits: u32,
    seed: u64,
    vectors: Vec<Complex64>,
}

impl ShapeCodebook {
    /// Draws the codebook from the stream identified by `seed`.
    pub fn generate(m: usize, bits: u32, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::OutOfRange("dimension must be at least 1"));
        }
        if bits >= 31 {
            return Err(Error::OutOfRange("too many shape bits"));
        }
        let mut rng = SeedSequence::new(seed, "shape-codebook").stream(bits as u64, m as u64);
        let n = 1usize << bits;
        let mut vectors = Vec::with_capacity(n * m);
        for _ in 0..n {
            vectors.extend(random_unit_vector(m, &mut rng));
        }
        Ok(Self { m, bits, seed, vectors })
    }

    /// Wraps stored codewords, given as `2^bits` consecutive `m`-vectors.
    pub fn from_vectors(m: usize, bits: u32, seed: u64, vectors: Vec<Complex64>) -> Result<Self> {
        if m == 0 || bits >= 31 || vectors.len() != m << bits {
            return Err(Error::InvalidCodebook("shape codebook must hold 2^B_s vectors of length M"));
        }
        for c in vectors.chunks_exact(m) {
            let norm = crate::linalg::norm(c);
            if !((norm - 1.0).abs() <= 1e-9) {
                return Err(Error::InvalidCodebook("shape codewords must have unit norm"));
            }
        }
        Ok(Self { m, bits, seed, vectors })
    }

    pub fn dimension(&self) -> usize {
        self.m
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn codeword(&self, i: usize) -> &[Complex64] {
        &self.vectors[i * self.m..(i + 1) * self.m]
    }

    pub fn codewords(&self) -> impl Iterator<Item = &[Complex64]> {
        self.vectors.chunks_exact(self.m)
    }

    /// Index maximizing `Re <c, s>`; ties go to the lower index.
    fn best_correlation(&self, s: &[Complex64]) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, c) in self.vectors.chunks_exact(self.m).enumerate() {
            let mut acc = 0.0;
            for (a, b) in c.iter().zip(s) {
                acc += a.re * b.re + a.im * b.im;
            }
            if acc > best.1 {
                best = (i, acc);
            }
        }
        best
    }
}

/// Uniform point on the unit sphere of `C^m`.
pub fn random_unit_vector<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..m).map(|_| complex_gaussian(rng)).collect();
        let norm = crate::linalg::norm(&v);
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn check_shape(s: &[Complex64], codebook: &ShapeCodebook) -> Result<()> {
    if s.len() != codebook.m {
        return Err(Error::DimensionMismatch { expected: codebook.m, found: s.len() });
    }
    let norm = crate::linalg::norm(s);
    if !((norm - 1.0).abs() <= UNIT_NORM_TOL) {
        return Err(Error::NotUnitNorm(norm));
    }
    Ok(())
}

/// Nearest codeword in Euclidean distance; returns its index and the
/// codeword. For unit vectors this is the codeword with the largest real
/// correlation, which is what is searched.
pub fn quantize_shape<'a>(s: &[Complex64], codebook: &'a ShapeCodebook) -> Result<(usize, &'a [Complex64])> {
    check_shape(s, codebook)?;
    let (i, _) = codebook.best_correlation(s);
    Ok((i, codebook.codeword(i)))
}

/// Squared distance from `s` to its nearest codeword.
pub fn shape_distortion(s: &[Complex64], codebook: &ShapeCodebook) -> Result<f64> {
    check_shape(s, codebook)?;
    let (i, _) = codebook.best_correlation(s);
    Ok(sqdist(s, codebook.codeword(i)))
}

pub fn sqdist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// Mean nearest-codeword squared distance over `queries` uniform shapes.
pub fn empirical_shape_distortion<R: Rng + ?Sized>(
    codebook: &ShapeCodebook,
    queries: usize,
    rng: &mut R,
) -> Result<f64> {
    if queries == 0 {
        return Err(Error::ZeroTrials);
    }
    let mut acc = crate::stats::CompensatedSum::default();
    for _ in 0..queries {
        let s = random_unit_vector(codebook.m, rng);
        acc.add(shape_distortion(&s, codebook)?);
    }
    Ok(acc.value() / queries as f64)
}

/// One draw of `min_i |s - c_i|^2` with a fresh random codebook of
/// `codewords` entries and a fresh uniform query.
pub fn sample_min_sqdist<R: Rng + ?Sized>(m: usize, codewords: usize, rng: &mut R) -> f64 {
    let s = random_unit_vector(m, rng);
    let mut best = f64::INFINITY;
    let mut c = alloc::vec![Complex64::new(0.0, 0.0); m];
    for _ in 0..codewords {
        let mut norm = 0.0;
        for x in c.iter_mut() {
            *x = complex_gaussian(rng);
            norm += x.norm_sqr();
        }
        let norm = libm::sqrt(norm);
        let mut corr = 0.0;
        for (a, b) in c.iter().zip(&s) {
            corr += a.re * b.re + a.im * b.im;
        }
        let d = 2.0 - 2.0 * corr / norm;
        if d < best {
            best = d;
        }
    }
    best.max(0.0)
}
