//! Downlink sum-MSE and bit-error-rate sweeps over SNR.

use anyhow::Result;
use shapegain_core::bitalloc::total_distortion;
use shapegain_core::link::{perfect_feedback, quantize_csi, realize_channels, run_downlink_trial, ProductCodebook};
use shapegain_core::precoder::{
    kkt_imbalance, mmse_precoder, optimize_virtual_uplink_power, NoiseModel, OptimizerOptions,
};
use shapegain_core::random::SeedSequence;
use shapegain_core::stats::MeanEstimator;

use super::{analytic_constants, chunked, core_err, train_codebooks};
use crate::config::{ExperimentSpec, SigmaE2Source};
use crate::report::Table;

/// What the base station receives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsiMode {
    /// Product-codebook feedback, one series per `B_s`.
    Quantized,
    /// Exact effective channels and `sigma_E^2 = 0`.
    Perfect,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Accumulator {
    smse: MeanEstimator,
    expected: MeanEstimator,
    predicted: MeanEstimator,
    /// Sampled minus predicted SMSE, trial by trial.
    gap: MeanEstimator,
    ber: MeanEstimator,
    distortion: MeanEstimator,
    bits: u64,
    bit_errors: u64,
    max_power_ratio: f64,
    kkt: f64,
}

impl Accumulator {
    fn merge(&mut self, o: &Accumulator) {
        self.smse.merge(&o.smse);
        self.expected.merge(&o.expected);
        self.predicted.merge(&o.predicted);
        self.gap.merge(&o.gap);
        self.ber.merge(&o.ber);
        self.distortion.merge(&o.distortion);
        self.bits += o.bits;
        self.bit_errors += o.bit_errors;
        self.max_power_ratio = self.max_power_ratio.max(o.max_power_ratio);
        self.kkt = self.kkt.max(o.kkt);
    }
}

/// One `(B_s, SNR)` grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkPoint {
    /// `None` for perfect CSI.
    pub shape_bits: Option<u32>,
    pub snr_db: f64,
    pub trials: u64,
    pub sigma_e2: f64,
    pub smse: f64,
    pub smse_std_error: f64,
    /// Mean of the per-trial MSE expected over symbols and noise.
    pub expected_smse: f64,
    pub predicted_smse: f64,
    /// Mean and std-error of sampled minus predicted SMSE.
    pub smse_gap: f64,
    pub smse_gap_std_error: f64,
    pub ber: f64,
    pub ber_std_error: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub distortion: f64,
    /// Largest `sum p / P_max` over trials.
    pub max_power_ratio: f64,
    /// Largest relative KKT imbalance of the optimizer output.
    pub max_kkt_imbalance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSweep {
    pub mode: CsiMode,
    pub points: Vec<LinkPoint>,
}

impl LinkSweep {
    pub fn smse_table(&self) -> Result<Table> {
        let mut t = Table::new(&[
            "B_s",
            "snr_db",
            "trials",
            "sigma_e2",
            "smse",
            "std_error",
            "expected_smse",
            "predicted_smse",
            "smse_minus_predicted",
            "smse_minus_predicted_std_error",
            "distortion",
        ]);
        for p in &self.points {
            t.push(vec![
                shape_cell(p),
                p.snr_db.into(),
                p.trials.into(),
                p.sigma_e2.into(),
                p.smse.into(),
                p.smse_std_error.into(),
                p.expected_smse.into(),
                p.predicted_smse.into(),
                p.smse_gap.into(),
                p.smse_gap_std_error.into(),
                p.distortion.into(),
            ])?;
        }
        Ok(t)
    }

    pub fn ber_table(&self) -> Result<Table> {
        let mut t = Table::new(&["B_s", "snr_db", "trials", "sigma_e2", "ber", "std_error", "bit_errors", "bits"]);
        for p in &self.points {
            t.push(vec![
                shape_cell(p),
                p.snr_db.into(),
                p.trials.into(),
                p.sigma_e2.into(),
                p.ber.into(),
                p.ber_std_error.into(),
                p.bit_errors.into(),
                p.bits.into(),
            ])?;
        }
        Ok(t)
    }

    pub fn point(&self, shape_bits: Option<u32>, snr_db: f64) -> Option<&LinkPoint> {
        self.points.iter().find(|p| p.shape_bits == shape_bits && p.snr_db == snr_db)
    }
}

fn shape_cell(p: &LinkPoint) -> crate::report::Cell {
    match p.shape_bits {
        Some(b) => b.into(),
        None => "perfect".into(),
    }
}

/// Simulates the downlink for every `B_s` (or perfect CSI) and SNR.
///
/// Trial `t` draws its channels from the same stream at every grid point and
/// its symbols and noise from a per-SNR stream, so the series differ only in
/// the feedback.
pub fn link_sweep(spec: &ExperimentSpec, mode: CsiMode) -> Result<LinkSweep> {
    let seeds = SeedSequence::new(spec.master_seed, "link");
    let series: Vec<(Option<u32>, Option<ProductCodebook>, f64)> = match mode {
        CsiMode::Perfect => vec![(None, None, 0.0)],
        CsiMode::Quantized => {
            let (gains, books) = train_codebooks(spec)?;
            let constants = analytic_constants(spec, &gains)?;
            let mut out = Vec::with_capacity(books.len());
            for (&bs, cb) in spec.shape_bits.iter().zip(books) {
                let sigma_e2 = match spec.sigma_e2_source {
                    SigmaE2Source::Analytic => {
                        total_distortion(bs as f64, (spec.feedback_bits() - bs) as f64, &constants.model)
                            .map_err(core_err)?
                    }
                    SigmaE2Source::Empirical => calibrate_sigma_e2(spec, &cb)?,
                };
                out.push((Some(bs), Some(cb), sigma_e2));
            }
            out
        }
    };
    let snrs = &spec.snr_db;
    let options = OptimizerOptions::default();
    let mut points = Vec::with_capacity(series.len() * snrs.len());
    for (bs, cb, sigma_e2) in &series {
        let noises = snrs
            .iter()
            .map(|&s| NoiseModel::new(spec.sigma2, *sigma_e2, spec.max_power(s)).map_err(core_err))
            .collect::<Result<Vec<_>>>()?;
        let parts = chunked(spec.trials, |range| {
            let mut acc = vec![Accumulator::default(); snrs.len()];
            for t in range {
                let mut rng = seeds.stream(0, t);
                let real = realize_channels(&spec.system, &mut rng).map_err(core_err)?;
                let feedback = match cb {
                    Some(cb) => quantize_csi(&real, cb),
                    None => perfect_feedback(&real),
                }
                .map_err(core_err)?;
                let d = feedback.total_distortion() / feedback.distortion.len() as f64;
                for (j, (noise, a)) in noises.iter().zip(acc.iter_mut()).enumerate() {
                    let q = optimize_virtual_uplink_power(&feedback.csi, noise, &options).map_err(core_err)?;
                    let sol = mmse_precoder(&feedback.csi, &q.q, noise).map_err(core_err)?;
                    let mut tx = seeds.stream(1 + j as u64, t);
                    let res = run_downlink_trial(
                        &real,
                        &feedback,
                        &sol,
                        noise,
                        spec.modulation,
                        spec.symbols_per_trial,
                        &mut tx,
                    )
                    .map_err(core_err)?;
                    a.smse.push(res.smse());
                    a.expected.push(res.expected_smse());
                    a.predicted.push(res.predicted_smse);
                    a.gap.push(res.smse() - res.predicted_smse);
                    a.ber.push(res.bit_error_rate());
                    a.distortion.push(d);
                    a.bits += res.bits;
                    a.bit_errors += res.bit_errors;
                    a.max_power_ratio = a.max_power_ratio.max(res.transmit_power / noise.max_power);
                    a.kkt = a.kkt.max(kkt_imbalance(&feedback.csi, &q.q, noise).map_err(core_err)?);
                }
            }
            Ok(acc)
        })?;
        let mut acc = vec![Accumulator::default(); snrs.len()];
        for part in &parts {
            for (a, b) in acc.iter_mut().zip(part) {
                a.merge(b);
            }
        }
        for (&snr_db, a) in snrs.iter().zip(&acc) {
            points.push(LinkPoint {
                shape_bits: *bs,
                snr_db,
                trials: a.smse.count(),
                sigma_e2: *sigma_e2,
                smse: a.smse.mean(),
                smse_std_error: a.smse.std_error(),
                expected_smse: a.expected.mean(),
                predicted_smse: a.predicted.mean(),
                smse_gap: a.gap.mean(),
                smse_gap_std_error: a.gap.std_error(),
                ber: a.ber.mean(),
                ber_std_error: a.ber.std_error(),
                bit_errors: a.bit_errors,
                bits: a.bits,
                distortion: a.distortion.mean(),
                max_power_ratio: a.max_power_ratio,
                max_kkt_imbalance: a.kkt,
            });
        }
    }
    Ok(LinkSweep { mode, points })
}

/// Mean `|z - z_hat|^2` per vector over independent calibration draws.
fn calibrate_sigma_e2(spec: &ExperimentSpec, cb: &ProductCodebook) -> Result<f64> {
    let seeds = SeedSequence::new(spec.master_seed, "sigma-e2-calibration");
    let draws = spec.trials.min(10_000);
    let parts = chunked(draws, |range| {
        let mut est = MeanEstimator::default();
        for t in range {
            let mut rng = seeds.stream(0, t);
            let real = realize_channels(&spec.system, &mut rng).map_err(core_err)?;
            let fb = quantize_csi(&real, cb).map_err(core_err)?;
            for d in &fb.distortion {
                est.push(*d);
            }
        }
        Ok(est)
    })?;
    let mut est = MeanEstimator::default();
    for p in &parts {
        est.merge(p);
    }
    Ok(est.mean())
}
