//! Quantizer distortion curves and the bit-allocation report.

use anyhow::{bail, Result};
use shapegain_core::bitalloc::{
    asymptotic_allocation, distortion_at_optimum, fit_constants_empirical, log2_slope, optimal_integer_allocation,
    optimal_real_allocation, scaling_constant, total_distortion, DistortionModel,
};
use shapegain_core::channel::EffectiveChannel;
use shapegain_core::gain::{empirical_gain_distortion, quantize_gain};
use shapegain_core::link::{quantize_vector, realize_channels};
use shapegain_core::random::SeedSequence;
use shapegain_core::shape::{
    analytic_shape_distortion, quantize_shape, random_unit_vector, shape_distortion as query_distortion,
    shape_distortion_series, sqdist,
};
use shapegain_core::stats::MeanEstimator;

use super::{
    analytic_constants, chunked, core_err, sample_gains, shape_codebook, train_codebooks, train_gain,
    AnalyticConstants, GainSamples, CHUNK,
};
use crate::config::ExperimentSpec;
use crate::report::Table;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainPoint {
    pub bits: u32,
    pub empirical: f64,
    pub analytic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainCurve {
    pub points: Vec<GainPoint>,
    /// Least-squares slope of `log2` empirical distortion against `B_g`.
    pub slope: f64,
    pub constants: AnalyticConstants,
    pub training: GainSamples,
}

impl GainCurve {
    pub fn table(&self) -> Result<Table> {
        let mut t = Table::new(&["B_g", "empirical", "analytic", "analytic_over_empirical"]);
        for p in &self.points {
            t.push(vec![p.bits.into(), p.empirical.into(), p.analytic.into(), (p.analytic / p.empirical).into()])?;
        }
        Ok(t)
    }
}

/// Trains a gain codebook for each `B_g` in the configuration and measures
/// it on an independent test ensemble of the same size.
pub fn gain_distortion(spec: &ExperimentSpec) -> Result<GainCurve> {
    if spec.gain_bits.is_empty() {
        bail!("B_g_list must not be empty");
    }
    let training = sample_gains(spec, spec.training_samples, "gain-training")?;
    let test = sample_gains(spec, spec.training_samples, "gain-test")?;
    let constants = analytic_constants(spec, &training)?;
    let mut points = Vec::with_capacity(spec.gain_bits.len());
    for &bits in &spec.gain_bits {
        let cb = train_gain(&training, bits)?;
        points.push(GainPoint {
            bits,
            empirical: empirical_gain_distortion(&cb, &test.values).map_err(core_err)?,
            analytic: constants.kg * (-2.0 * bits as f64).exp2(),
        });
    }
    let curve: Vec<(f64, f64)> = points.iter().map(|p| (p.bits as f64, p.empirical)).collect();
    let slope = if curve.len() >= 2 { log2_slope(&curve).map_err(core_err)? } else { f64::NAN };
    Ok(GainCurve { points, slope, constants, training })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapePoint {
    pub bits: u32,
    pub empirical: f64,
    pub std_error: f64,
    /// `K_s 2^(-2 B_s / (2M - 1))`
    pub bound: f64,
    pub series: f64,
}

impl ShapePoint {
    /// `log2(bound / empirical)`
    pub fn log2_gap(&self) -> f64 {
        (self.bound / self.empirical).log2()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeCurve {
    pub points: Vec<ShapePoint>,
    pub slope: f64,
}

impl ShapeCurve {
    pub fn table(&self) -> Result<Table> {
        let mut t = Table::new(&["B_s", "empirical", "std_error", "bound", "series", "log2_gap"]);
        for p in &self.points {
            t.push(vec![
                p.bits.into(),
                p.empirical.into(),
                p.std_error.into(),
                p.bound.into(),
                p.series.into(),
                p.log2_gap().into(),
            ])?;
        }
        Ok(t)
    }
}

/// RVQ distortion for each `B_s`, using the same uniform queries at every
/// codebook size.
pub fn shape_distortion(spec: &ExperimentSpec) -> Result<ShapeCurve> {
    let m = spec.transmit_antennas();
    let seeds = SeedSequence::new(spec.master_seed, "shape-queries");
    let mut points = Vec::with_capacity(spec.shape_bits.len());
    for &bits in &spec.shape_bits {
        let cb = shape_codebook(spec, bits)?;
        let parts = chunked(spec.queries as u64, |range| {
            let mut rng = seeds.stream(0, range.start / CHUNK);
            let mut est = MeanEstimator::default();
            for _ in range {
                let s = random_unit_vector(m, &mut rng);
                est.push(query_distortion(&s, &cb).map_err(core_err)?);
            }
            Ok(est)
        })?;
        let mut est = MeanEstimator::default();
        for p in &parts {
            est.merge(p);
        }
        points.push(ShapePoint {
            bits,
            empirical: est.mean(),
            std_error: est.std_error(),
            bound: analytic_shape_distortion(m as u32, bits).map_err(core_err)?,
            series: shape_distortion_series(m as u32, bits).map_err(core_err)?,
        });
    }
    let curve: Vec<(f64, f64)> = points.iter().map(|p| (p.bits as f64, p.empirical)).collect();
    let slope = if curve.len() >= 2 { log2_slope(&curve).map_err(core_err)? } else { f64::NAN };
    Ok(ShapeCurve { points, slope })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitallocPoint {
    pub shape_bits: u32,
    pub gain_bits: u32,
    /// Mean `|z - z_hat|^2` per fed-back vector.
    pub empirical: f64,
    pub std_error: f64,
    /// Mean `(g - g_hat)^2`.
    pub gain_part: f64,
    /// Mean `g^2 |s - s_hat|^2`.
    pub shape_part: f64,
    pub analytic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BitallocSweep {
    pub points: Vec<BitallocPoint>,
    pub constants: AnalyticConstants,
}

impl BitallocSweep {
    pub fn table(&self) -> Result<Table> {
        let mut t = Table::new(&["B_s", "B_g", "empirical", "std_error", "gain_part", "shape_part", "analytic"]);
        for p in &self.points {
            t.push(vec![
                p.shape_bits.into(),
                p.gain_bits.into(),
                p.empirical.into(),
                p.std_error.into(),
                p.gain_part.into(),
                p.shape_part.into(),
                p.analytic.into(),
            ])?;
        }
        Ok(t)
    }

    /// Point with the lowest empirical distortion.
    pub fn argmin(&self) -> &BitallocPoint {
        self.points.iter().min_by(|a, b| a.empirical.total_cmp(&b.empirical)).expect("sweep has at least one point")
    }
}

/// Empirical `|z - z_hat|^2` for every split in `B_s_list`. All splits see
/// the same channel draws.
pub fn bitalloc_sweep(spec: &ExperimentSpec) -> Result<BitallocSweep> {
    let (gains, books) = train_codebooks(spec)?;
    let constants = analytic_constants(spec, &gains)?;
    let seeds = SeedSequence::new(spec.master_seed, "bitalloc");
    let total = spec.feedback_bits();
    let mut points = Vec::with_capacity(books.len());
    for (&bs, cb) in spec.shape_bits.iter().zip(&books) {
        let parts = chunked(spec.trials, |range| {
            let mut acc = [MeanEstimator::default(); 3];
            for t in range {
                let mut rng = seeds.stream(0, t);
                let real = realize_channels(&spec.system, &mut rng).map_err(core_err)?;
                let (mut d, mut dg, mut ds) = (0.0, 0.0, 0.0);
                for e in &real.effective {
                    let (total, gain, shape) = split_distortion(e, cb)?;
                    d += total;
                    dg += gain;
                    ds += shape;
                }
                let n = real.effective.len() as f64;
                acc[0].push(d / n);
                acc[1].push(dg / n);
                acc[2].push(ds / n);
            }
            Ok(acc)
        })?;
        let mut acc = [MeanEstimator::default(); 3];
        for p in &parts {
            for (a, b) in acc.iter_mut().zip(p) {
                a.merge(b);
            }
        }
        points.push(BitallocPoint {
            shape_bits: bs,
            gain_bits: total - bs,
            empirical: acc[0].mean(),
            std_error: acc[0].std_error(),
            gain_part: acc[1].mean(),
            shape_part: acc[2].mean(),
            analytic: total_distortion(bs as f64, (total - bs) as f64, &constants.model).map_err(core_err)?,
        });
    }
    Ok(BitallocSweep { points, constants })
}

fn split_distortion(e: &EffectiveChannel, cb: &shapegain_core::link::ProductCodebook) -> Result<(f64, f64, f64)> {
    let q = quantize_vector(e, cb).map_err(core_err)?;
    let (_, g_hat) = quantize_gain(e.gain, cb.gain()).map_err(core_err)?;
    let (_, s_hat) = quantize_shape(&e.shape, cb.shape()).map_err(core_err)?;
    Ok((q.distortion, (e.gain - g_hat) * (e.gain - g_hat), e.gain * e.gain * sqdist(&e.shape, s_hat)))
}

/// Allocation produced by one set of distortion constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationRow {
    pub kg: f64,
    pub ks_bar: f64,
    pub real_shape_bits: f64,
    pub real_gain_bits: f64,
    pub unclamped_shape_bits: f64,
    pub integer_shape_bits: u32,
    pub integer_gain_bits: u32,
    pub distortion: f64,
    pub scaling_constant: f64,
}

impl AllocationRow {
    fn new(model: &DistortionModel, total: u32) -> Self {
        let real = optimal_real_allocation(model, total);
        let int = optimal_integer_allocation(model, total);
        Self {
            kg: model.kg,
            ks_bar: model.ks_bar,
            real_shape_bits: real.shape_bits,
            real_gain_bits: real.gain_bits,
            unclamped_shape_bits: real.unclamped_shape_bits,
            integer_shape_bits: int.shape_bits,
            integer_gain_bits: int.gain_bits,
            distortion: distortion_at_optimum(model, total),
            scaling_constant: scaling_constant(model, total),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationReport {
    pub total_bits: u32,
    pub analytic: AllocationRow,
    pub fitted: AllocationRow,
    /// `((2M-1)/2M B, B/2M)`
    pub asymptotic: (f64, f64),
    pub gain_curve: GainCurve,
    pub shape_curve: ShapeCurve,
}

impl AllocationReport {
    pub fn table(&self) -> Result<Table> {
        let mut t = Table::new(&[
            "constants",
            "K_g",
            "K_s_bar",
            "B_s_real",
            "B_g_real",
            "B_s_unclamped",
            "B_s_int",
            "B_g_int",
            "D_opt",
            "D_c",
        ]);
        for (name, r) in [("analytic", &self.analytic), ("fitted", &self.fitted)] {
            t.push(vec![
                name.into(),
                r.kg.into(),
                r.ks_bar.into(),
                r.real_shape_bits.into(),
                r.real_gain_bits.into(),
                r.unclamped_shape_bits.into(),
                r.integer_shape_bits.into(),
                r.integer_gain_bits.into(),
                r.distortion.into(),
                r.scaling_constant.into(),
            ])?;
        }
        Ok(t)
    }
}

/// Optimal split of `B` under closed-form constants and under constants
/// fitted to the measured gain (`B_g_list`) and shape (`B_s_list`) curves.
pub fn allocate(spec: &ExperimentSpec) -> Result<AllocationReport> {
    let total = spec.feedback_bits();
    let m = spec.transmit_antennas() as u32;
    let gain_curve = gain_distortion(spec)?;
    let shape_curve = shape_distortion(spec)?;
    let gc: Vec<(f64, f64)> = gain_curve.points.iter().map(|p| (p.bits as f64, p.empirical)).collect();
    let sc: Vec<(f64, f64)> = shape_curve.points.iter().map(|p| (p.bits as f64, p.empirical)).collect();
    let fitted = fit_constants_empirical(&gc, &sc, gain_curve.training.mean_gain_sq, m).map_err(core_err)?;
    Ok(AllocationReport {
        total_bits: total,
        analytic: AllocationRow::new(&gain_curve.constants.model, total),
        fitted: AllocationRow::new(&fitted.model, total),
        asymptotic: asymptotic_allocation(m, total),
        gain_curve,
        shape_curve,
    })
}
