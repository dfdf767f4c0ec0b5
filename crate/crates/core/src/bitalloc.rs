//! Splitting a feedback budget between gain and shape bits.

use alloc::vec::Vec;
use core::f64::consts::LN_2;

use crate::error::{Error, Result};

/// `D(B_s, B_g) = Ks_bar 2^(-2 B_s / (2M-1)) + K_g 2^(-2 B_g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionModel {
    pub kg: f64,
    /// Shape constant scaled by the mean squared gain, `K_s E[g^2]`.
    pub ks_bar: f64,
    pub m: u32,
}

impl DistortionModel {
    pub fn new(kg: f64, ks_bar: f64, m: u32) -> Result<Self> {
        if !(kg > 0.0 && kg.is_finite() && ks_bar > 0.0 && ks_bar.is_finite()) {
            return Err(Error::OutOfRange("distortion constants must be positive"));
        }
        if m == 0 {
            return Err(Error::OutOfRange("dimension must be at least 1"));
        }
        Ok(Self { kg, ks_bar, m })
    }

    fn shape_exponent(&self) -> f64 {
        2.0 / (2 * self.m - 1) as f64
    }

    pub fn shape_term(&self, shape_bits: f64) -> f64 {
        self.ks_bar * libm::exp2(-self.shape_exponent() * shape_bits)
    }

    pub fn gain_term(&self, gain_bits: f64) -> f64 {
        self.kg * libm::exp2(-2.0 * gain_bits)
    }
}

pub fn total_distortion(shape_bits: f64, gain_bits: f64, model: &DistortionModel) -> Result<f64> {
    if !(shape_bits >= 0.0 && gain_bits >= 0.0) {
        return Err(Error::OutOfRange("bit counts must be nonnegative"));
    }
    Ok(model.shape_term(shape_bits) + model.gain_term(gain_bits))
}

/// Real-valued split of `B` bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealAllocation {
    pub shape_bits: f64,
    pub gain_bits: f64,
    /// Stationary point before clamping to `[0, B]`.
    pub unclamped_shape_bits: f64,
}

/// Integer split of `B` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitAllocation {
    pub total: u32,
    pub shape_bits: u32,
    pub gain_bits: u32,
}

/// Stationary point of the total distortion along `B_s + B_g = B`:
///
/// `B_s = (2M-1)/(2M) B + (2M-1)/(4M) log2(Ks_bar / (K_g (2M-1)))`,
///
/// clamped into `[0, B]`.
pub fn optimal_real_allocation(model: &DistortionModel, total: u32) -> RealAllocation {
    let n = (2 * model.m - 1) as f64;
    let two_m = 2.0 * model.m as f64;
    let b = total as f64;
    let unclamped = n / two_m * b + n / (2.0 * two_m) * libm::log2(model.ks_bar / (model.kg * n));
    let shape_bits = unclamped.clamp(0.0, b);
    RealAllocation { shape_bits, gain_bits: b - shape_bits, unclamped_shape_bits: unclamped }
}

/// Exhaustive search over integer splits; ties go to more shape bits.
pub fn optimal_integer_allocation(model: &DistortionModel, total: u32) -> BitAllocation {
    let mut best = (0, f64::INFINITY);
    for bs in 0..=total {
        let d = model.shape_term(bs as f64) + model.gain_term((total - bs) as f64);
        if d <= best.1 {
            best = (bs, d);
        }
    }
    BitAllocation { total, shape_bits: best.0, gain_bits: total - best.0 }
}

/// Large-`B` limit `B_s = (2M-1) B / (2M)`, `B_g = B / (2M)`.
pub fn asymptotic_allocation(m: u32, total: u32) -> (f64, f64) {
    let b = total as f64;
    let two_m = 2.0 * m as f64;
    ((two_m - 1.0) * b / two_m, b / two_m)
}

/// Total distortion at the real-valued optimum.
pub fn distortion_at_optimum(model: &DistortionModel, total: u32) -> f64 {
    let alloc = optimal_real_allocation(model, total);
    model.shape_term(alloc.shape_bits) + model.gain_term(alloc.gain_bits)
}

/// `D_c` in `D = D_c 2^(-B/M)`, obtained by substitution.
pub fn scaling_constant(model: &DistortionModel, total: u32) -> f64 {
    distortion_at_optimum(model, total) * libm::exp2(total as f64 / model.m as f64)
}

/// `dD/dB_s` along `B_g = B - B_s`.
pub fn distortion_derivative(model: &DistortionModel, shape_bits: f64, total: u32) -> f64 {
    let gain_bits = total as f64 - shape_bits;
    -model.shape_exponent() * LN_2 * model.shape_term(shape_bits) + 2.0 * LN_2 * model.gain_term(gain_bits)
}

/// `d^2 D / dB_s^2` along `B_g = B - B_s`.
pub fn distortion_second_derivative(model: &DistortionModel, shape_bits: f64, total: u32) -> f64 {
    let gain_bits = total as f64 - shape_bits;
    let a = model.shape_exponent() * LN_2;
    let c = 2.0 * LN_2;
    a * a * model.shape_term(shape_bits) + c * c * model.gain_term(gain_bits)
}

/// Fits `K` in `d = K 2^(-slope B)` as the geometric mean of
/// `d 2^(slope B)` over the curve.
pub fn fit_law_constant(curve: &[(f64, f64)], slope: f64) -> Result<f64> {
    if curve.len() < 3 {
        return Err(Error::TooFewSamples { required: 3, provided: curve.len() });
    }
    let mut acc = crate::stats::CompensatedSum::default();
    for &(bits, d) in curve {
        if !(d > 0.0) {
            return Err(Error::NonPositiveDistortion);
        }
        acc.add(libm::log(d) + slope * bits * LN_2);
    }
    Ok(libm::exp(acc.value() / curve.len() as f64))
}

/// Distortion constants fitted to measured `(bits, distortion)` curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FittedConstants {
    pub kg: f64,
    pub ks: f64,
    pub model: DistortionModel,
}

pub fn fit_constants_empirical(
    gain_curve: &[(f64, f64)],
    shape_curve: &[(f64, f64)],
    mean_gain_sq: f64,
    m: u32,
) -> Result<FittedConstants> {
    if m == 0 {
        return Err(Error::OutOfRange("dimension must be at least 1"));
    }
    let kg = fit_law_constant(gain_curve, 2.0)?;
    let ks = fit_law_constant(shape_curve, 2.0 / (2 * m - 1) as f64)?;
    Ok(FittedConstants { kg, ks, model: DistortionModel::new(kg, ks * mean_gain_sq, m)? })
}

/// Least-squares slope of `log2(d)` against bits.
pub fn log2_slope(curve: &[(f64, f64)]) -> Result<f64> {
    if curve.len() < 2 {
        return Err(Error::TooFewSamples { required: 2, provided: curve.len() });
    }
    if curve.iter().any(|&(_, d)| !(d > 0.0)) {
        return Err(Error::NonPositiveDistortion);
    }
    let n = curve.len() as f64;
    let pts: Vec<(f64, f64)> = curve.iter().map(|&(b, d)| (b, libm::log2(d))).collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}
