//! Monte Carlo experiments behind each subcommand.
//!
//! Random draws come from streams keyed by `(master_seed, label, tag,
//! index)`, so every figure is reproducible and experiments never share
//! randomness. Work is split into fixed-size chunks whose partial results are
//! merged in chunk order; the output does not depend on the thread count.

use std::ops::Range;

use anyhow::{anyhow, Result};
use rayon::prelude::*;
use shapegain_core::bitalloc::DistortionModel;
use shapegain_core::channel::{dominant_modes, sample_channel};
use shapegain_core::gain::{kg_constant, train_gain_codebook, GainCodebook, GainPdfParams, TrainOptions};
use shapegain_core::link::ProductCodebook;
use shapegain_core::random::SeedSequence;
use shapegain_core::shape::{ks_constant, ShapeCodebook};
use shapegain_core::stats::MeanEstimator;

use crate::config::ExperimentSpec;

pub mod ccdf;
pub mod distortion;
pub mod link;

pub use ccdf::{ccdf_compare, CcdfCurve};
pub use distortion::{
    allocate, bitalloc_sweep, gain_distortion, shape_distortion, AllocationReport, BitallocSweep, GainCurve, ShapeCurve,
};
pub use link::{link_sweep, CsiMode, LinkSweep};

pub(crate) const CHUNK: u64 = 512;

/// Runs `f` over `[0, count)` in fixed chunks and returns the chunk results
/// in order.
pub(crate) fn chunked<T, F>(count: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Range<u64>) -> Result<T> + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    (0..chunks).into_par_iter().map(|c| f(c * CHUNK..((c + 1) * CHUNK).min(count))).collect()
}

pub(crate) fn core_err(e: shapegain_core::Error) -> anyhow::Error {
    anyhow!("{e}")
}

/// Gains of the vectors the users feed back, pooled over users and streams.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSamples {
    pub values: Vec<f64>,
    /// Mean squared gain of every pooled vector, `E[g^2]`.
    pub mean_gain_sq: f64,
    /// Mean of the dominant eigenvalue of the first user.
    pub lambda_tilde: f64,
}

/// Draws channels until `count` gains are collected. Draw `i` belongs to
/// user `i mod K` and contributes the gains of all of that user's streams.
pub fn sample_gains(spec: &ExperimentSpec, count: usize, label: &str) -> Result<GainSamples> {
    let seeds = SeedSequence::new(spec.master_seed, label);
    let users = spec.system.users();
    let per_draw: Vec<usize> = users.iter().map(|u| u.streams).collect();
    let cycle: usize = per_draw.iter().sum();
    let draws = (count.div_ceil(cycle) * users.len()) as u64;
    let parts = chunked(draws, |range| {
        let mut out = Vec::new();
        let mut dominant = MeanEstimator::default();
        for i in range {
            let k = (i % users.len() as u64) as usize;
            let mut rng = seeds.stream(0, i);
            let h = sample_channel(&spec.system, k, &mut rng).map_err(core_err)?;
            let modes = dominant_modes(&h, users[k].streams).map_err(core_err)?;
            if k == 0 {
                dominant.push(modes[0].lambda);
            }
            out.extend(modes.iter().map(|m| m.sigma));
        }
        Ok((out, dominant))
    })?;
    let mut values = Vec::with_capacity(count);
    let mut dominant = MeanEstimator::default();
    for (v, d) in parts {
        values.extend(v);
        dominant.merge(&d);
    }
    values.truncate(count);
    let mut sq = shapegain_core::stats::CompensatedSum::default();
    for g in &values {
        sq.add(g * g);
    }
    Ok(GainSamples { mean_gain_sq: sq.value() / values.len() as f64, lambda_tilde: dominant.mean(), values })
}

/// Closed-form constants: the singular-value pdf of the first user's
/// dominant mode for `K_g`, and `K_s E[g^2]` for the shape term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticConstants {
    pub kg: f64,
    pub ks: f64,
    pub mean_gain_sq: f64,
    pub lambda_tilde: f64,
    pub model: DistortionModel,
}

pub fn analytic_constants(spec: &ExperimentSpec, gains: &GainSamples) -> Result<AnalyticConstants> {
    let m = spec.transmit_antennas();
    let n = spec.system.users()[0].receive_antennas;
    let params = GainPdfParams::for_eigenvalue(m, n, 0, gains.lambda_tilde).map_err(core_err)?;
    let kg = kg_constant(&params).kg;
    let ks = ks_constant(m as u32).map_err(core_err)?.ks;
    Ok(AnalyticConstants {
        kg,
        ks,
        mean_gain_sq: gains.mean_gain_sq,
        lambda_tilde: gains.lambda_tilde,
        model: DistortionModel::new(kg, ks * gains.mean_gain_sq, m as u32).map_err(core_err)?,
    })
}

/// Trains the gain codebook for `bits` on the training ensemble.
pub fn train_gain(gains: &GainSamples, bits: u32) -> Result<GainCodebook> {
    train_gain_codebook(&gains.values, bits, &TrainOptions::default()).map_err(core_err)
}

/// Random shape codebook shared by every experiment with this seed.
pub fn shape_codebook(spec: &ExperimentSpec, bits: u32) -> Result<ShapeCodebook> {
    ShapeCodebook::generate(spec.transmit_antennas(), bits, spec.master_seed).map_err(core_err)
}

/// Product codebooks for every `B_s` in the configuration.
pub fn train_codebooks(spec: &ExperimentSpec) -> Result<(GainSamples, Vec<ProductCodebook>)> {
    let gains = sample_gains(spec, spec.training_samples, "gain-training")?;
    let books = spec
        .shape_bits
        .iter()
        .map(|&bs| {
            let gain = train_gain(&gains, spec.feedback_bits() - bs)?;
            Ok(ProductCodebook::new(gain, shape_codebook(spec, bs)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((gains, books))
}
