//! One channel use of the limited-feedback downlink: channel draw, feedback
//! quantization and transmission through the precoder to the per-stream
//! receivers.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{
    dominant_modes, effective_channel, sample_channel, ChannelMatrix, EffectiveChannel, EigenMode, SystemConfig,
};
use crate::error::{Error, Result};
use crate::gain::{quantize_gain, GainCodebook};
use crate::linalg::inner;
use crate::modulation::Modulation;
use crate::precoder::{NoiseModel, PrecoderSolution, QuantizedCsi, StreamLabel};
use crate::random::complex_gaussian;
use crate::shape::{quantize_shape, ShapeCodebook};

/// Gain and shape codebooks shared by the base station and the users.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductCodebook {
    gain: GainCodebook,
    shape: ShapeCodebook,
}

impl ProductCodebook {
    pub fn new(gain: GainCodebook, shape: ShapeCodebook) -> Self {
        Self { gain, shape }
    }

    pub fn gain(&self) -> &GainCodebook {
        &self.gain
    }

    pub fn shape(&self) -> &ShapeCodebook {
        &self.shape
    }

    /// Feedback bits per quantized vector.
    pub fn bits(&self) -> u32 {
        self.gain.bits() + self.shape.bits()
    }
}

/// Indices sent back for one vector and its reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedVector {
    pub gain_index: usize,
    pub shape_index: usize,
    pub z_hat: Vec<Complex64>,
    /// `|z - z_hat|^2`
    pub distortion: f64,
}

pub fn quantize_vector(channel: &EffectiveChannel, codebook: &ProductCodebook) -> Result<QuantizedVector> {
    if channel.z.len() != codebook.shape.dimension() {
        return Err(Error::DimensionMismatch { expected: codebook.shape.dimension(), found: channel.z.len() });
    }
    let (gain_index, g_hat) = quantize_gain(channel.gain, &codebook.gain)?;
    let (shape_index, s_hat) = quantize_shape(&channel.shape, &codebook.shape)?;
    let z_hat: Vec<Complex64> = s_hat.iter().map(|s| s * g_hat).collect();
    let distortion = channel.z.iter().zip(&z_hat).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(QuantizedVector { gain_index, shape_index, z_hat, distortion })
}

/// Channels of every user with the modes each user feeds back.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub channels: Vec<ChannelMatrix>,
    pub modes: Vec<Vec<EigenMode>>,
    /// Effective vectors of all streams, user by user.
    pub effective: Vec<EffectiveChannel>,
    pub labels: Vec<StreamLabel>,
}

impl ChannelRealization {
    pub fn streams(&self) -> usize {
        self.effective.len()
    }

    fn mode(&self, label: StreamLabel) -> &EigenMode {
        &self.modes[label.user][label.stream]
    }
}

pub fn realize_channels<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> Result<ChannelRealization> {
    let mut channels = Vec::with_capacity(config.users().len());
    let mut modes = Vec::with_capacity(config.users().len());
    let mut effective = Vec::new();
    let mut labels = Vec::new();
    for (k, user) in config.users().iter().enumerate() {
        let h = sample_channel(config, k, rng)?;
        let m = dominant_modes(&h, user.streams)?;
        effective.extend(effective_channel(&h, &m)?);
        labels.extend((0..user.streams).map(|stream| StreamLabel { user: k, stream }));
        channels.push(h);
        modes.push(m);
    }
    Ok(ChannelRealization { channels, modes, effective, labels })
}

/// What the base station learns about a realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Feedback {
    pub csi: QuantizedCsi,
    /// Per-stream `|z - z_hat|^2`.
    pub distortion: Vec<f64>,
}

impl Feedback {
    pub fn total_distortion(&self) -> f64 {
        self.distortion.iter().sum()
    }
}

/// Unquantized feedback.
pub fn perfect_feedback(realization: &ChannelRealization) -> Result<Feedback> {
    let cols = realization.effective.iter().map(|e| e.z.clone()).collect();
    Ok(Feedback {
        csi: QuantizedCsi::new(cols, realization.labels.clone())?,
        distortion: vec![0.0; realization.streams()],
    })
}

/// Quantizes every stream's effective vector with the product codebook.
pub fn quantize_csi(realization: &ChannelRealization, codebook: &ProductCodebook) -> Result<Feedback> {
    let mut cols = Vec::with_capacity(realization.streams());
    let mut distortion = Vec::with_capacity(realization.streams());
    for e in &realization.effective {
        let q = quantize_vector(e, codebook)?;
        distortion.push(q.distortion);
        cols.push(q.z_hat);
    }
    Ok(Feedback { csi: QuantizedCsi::new(cols, realization.labels.clone())?, distortion })
}

/// Outcome of transmitting a block of symbols through one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Per-stream mean of `|x_hat - x|^2` over the block.
    pub squared_errors: Vec<f64>,
    /// Per-stream MSE averaged over symbols and noise, given the channel.
    pub expected_mse: Vec<f64>,
    pub bits: u64,
    pub bit_errors: u64,
    pub predicted_smse: f64,
    pub quantization_distortion: f64,
    /// `sum p E|x|^2`
    pub transmit_power: f64,
}

impl TrialResult {
    pub fn smse(&self) -> f64 {
        self.squared_errors.iter().sum()
    }

    pub fn expected_smse(&self) -> f64 {
        self.expected_mse.iter().sum()
    }

    pub fn bit_error_rate(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits as f64
        }
    }
}

/// Sends `symbols` random symbol vectors through the precoder.
///
/// Receiver `k` forms `x_hat = lambda v^H y_k` per stream, where `v` is its
/// own right singular vector and `lambda` the MMSE scalar for the composite
/// channel it observes. Hard decisions are taken on `v^H y_k` divided by the
/// stream's own composite gain.
pub fn run_downlink_trial<R: Rng + ?Sized>(
    realization: &ChannelRealization,
    feedback: &Feedback,
    solution: &PrecoderSolution,
    noise: &NoiseModel,
    modulation: Modulation,
    symbols: usize,
    rng: &mut R,
) -> Result<TrialResult> {
    let l = realization.streams();
    if solution.u.cols() != l || solution.p.len() != l {
        return Err(Error::DimensionMismatch { expected: l, found: solution.u.cols() });
    }
    let m = solution.u.rows();
    let columns: Vec<Vec<Complex64>> = (0..l)
        .map(|j| {
            let s = libm::sqrt(solution.p[j]);
            solution.u.column(j).into_iter().map(|x| x * s).collect()
        })
        .collect();
    // a[l][j]: gain from stream j's symbol to stream l's combiner output
    let a: Vec<Vec<Complex64>> =
        realization.effective.iter().map(|e| columns.iter().map(|c| inner(&e.z, c)).collect()).collect();
    let mut lambda = Vec::with_capacity(l);
    let mut expected_mse = Vec::with_capacity(l);
    for (i, row) in a.iter().enumerate() {
        let total: f64 = row.iter().map(|x| x.norm_sqr()).sum::<f64>() + noise.sigma2;
        lambda.push(row[i].conj() / total);
        expected_mse.push(1.0 - row[i].norm_sqr() / total);
    }

    let k = modulation.bits_per_symbol();
    let mut sq = vec![0.0; l];
    let mut bit_errors = 0u64;
    let mut tx_bits = vec![0u8; k * l];
    let noise_scale = libm::sqrt(noise.sigma2);
    for _ in 0..symbols {
        for b in tx_bits.iter_mut() {
            *b = u8::from(rng.random::<bool>());
        }
        let x = modulation.modulate(&tx_bits)?;
        let mut t = vec![Complex64::new(0.0, 0.0); m];
        for (c, xj) in columns.iter().zip(&x) {
            for (ti, ci) in t.iter_mut().zip(c) {
                *ti += ci * xj;
            }
        }
        let noises: Vec<Vec<Complex64>> = realization
            .channels
            .iter()
            .map(|h| (0..h.receive_antennas()).map(|_| complex_gaussian(rng) * noise_scale).collect())
            .collect();
        for (i, label) in realization.labels.iter().enumerate() {
            let v = &realization.mode(*label).v;
            let r = inner(&realization.effective[i].z, &t) + inner(v, &noises[label.user]);
            let x_hat = lambda[i] * r;
            sq[i] += (x_hat - x[i]).norm_sqr();
            let decided = if a[i][i].norm_sqr() > 0.0 { r / a[i][i] } else { r };
            let rx = modulation.demodulate(&[decided]);
            bit_errors += rx.iter().zip(&tx_bits[i * k..(i + 1) * k]).filter(|(p, q)| p != q).count() as u64;
        }
    }
    if symbols > 0 {
        for s in sq.iter_mut() {
            *s /= symbols as f64;
        }
    }
    Ok(TrialResult {
        squared_errors: sq,
        expected_mse,
        bits: (symbols * k * l) as u64,
        bit_errors,
        predicted_smse: solution.predicted_smse,
        quantization_distortion: feedback.total_distortion(),
        transmit_power: solution.p.iter().sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gain::GainCodebook;
    use crate::precoder::{mmse_precoder, optimize_virtual_uplink_power, OptimizerOptions};
    use crate::random::SeedSequence;
    use crate::stats::MeanEstimator;

    fn system(users: usize, n: usize, l: usize, p: f64) -> SystemConfig {
        SystemConfig::symmetric(2, users, n, l, p, 1.0, 16).unwrap()
    }

    fn solve(feedback: &Feedback, noise: &NoiseModel) -> PrecoderSolution {
        let q = optimize_virtual_uplink_power(&feedback.csi, noise, &OptimizerOptions::default()).unwrap();
        mmse_precoder(&feedback.csi, &q.q, noise).unwrap()
    }

    #[test]
    fn codebook_member_has_zero_distortion() {
        let shape = ShapeCodebook::generate(2, 3, 4).unwrap();
        let gain = GainCodebook::new(vec![0.5, 1.25], 1).unwrap();
        let cb = ProductCodebook::new(gain, shape.clone());
        assert_eq!(cb.bits(), 4);
        let z: Vec<Complex64> = shape.codeword(5).iter().map(|c| c * 1.25).collect();
        let e = EffectiveChannel::new(z.clone()).unwrap();
        let q = quantize_vector(&e, &cb).unwrap();
        assert_eq!((q.gain_index, q.shape_index), (1, 5));
        assert!(q.distortion < 1e-28);
    }

    #[test]
    fn perfect_csi_matches_prediction_per_trial() {
        let seeds = SeedSequence::new(8, "duality");
        for trial in 0..200 {
            let mut rng = seeds.stream(0, trial);
            for (users, n, l) in [(2, 2, 1), (1, 2, 2), (2, 1, 1)] {
                let config = system(users, n, l, 10.0);
                let real = realize_channels(&config, &mut rng).unwrap();
                let fb = perfect_feedback(&real).unwrap();
                let noise = NoiseModel::new(1.0, 0.0, 10.0).unwrap();
                let sol = solve(&fb, &noise);
                let res = run_downlink_trial(&real, &fb, &sol, &noise, Modulation::Qam16, 0, &mut rng).unwrap();
                assert!(
                    (res.expected_smse() - sol.predicted_smse).abs() < 1e-6,
                    "{} vs {}",
                    res.expected_smse(),
                    sol.predicted_smse
                );
                assert!(res.transmit_power <= 10.0 * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn sampled_errors_average_to_expected_mse() {
        let config = system(2, 2, 1, 5.0);
        let mut rng = SeedSequence::new(3, "sampled").stream(0, 0);
        let real = realize_channels(&config, &mut rng).unwrap();
        let fb = perfect_feedback(&real).unwrap();
        let noise = NoiseModel::new(1.0, 0.0, 5.0).unwrap();
        let sol = solve(&fb, &noise);
        let mut est = MeanEstimator::default();
        let mut expected = 0.0;
        for _ in 0..200 {
            let res = run_downlink_trial(&real, &fb, &sol, &noise, Modulation::Qpsk, 100, &mut rng).unwrap();
            est.push(res.smse());
            expected = res.expected_smse();
        }
        assert!((est.mean() - expected).abs() < 4.0 * est.std_error());
    }

    #[test]
    fn noiseless_single_stream_is_error_free() {
        let config = SystemConfig::symmetric(2, 1, 2, 1, 1.0, 1e-12, 16).unwrap();
        let mut rng = SeedSequence::new(4, "noiseless").stream(0, 0);
        for _ in 0..20 {
            let real = realize_channels(&config, &mut rng).unwrap();
            let fb = perfect_feedback(&real).unwrap();
            let noise = NoiseModel::new(1e-12, 0.0, 1.0).unwrap();
            let sol = solve(&fb, &noise);
            let res = run_downlink_trial(&real, &fb, &sol, &noise, Modulation::Qam16, 50, &mut rng).unwrap();
            assert_eq!(res.bit_errors, 0);
            assert_eq!(res.bits, 200);
        }
    }

    #[test]
    fn trials_are_reproducible() {
        let config = system(2, 2, 1, 10.0);
        let shape = ShapeCodebook::generate(2, 6, 1).unwrap();
        let gain = GainCodebook::new(vec![0.8, 1.4, 2.0, 2.8], 2).unwrap();
        let cb = ProductCodebook::new(gain, shape);
        let run = || {
            let mut rng = SeedSequence::new(9, "repro").stream(0, 3);
            let real = realize_channels(&config, &mut rng).unwrap();
            let fb = quantize_csi(&real, &cb).unwrap();
            let noise = NoiseModel::new(1.0, 0.05, 10.0).unwrap();
            let sol = solve(&fb, &noise);
            run_downlink_trial(&real, &fb, &sol, &noise, Modulation::Qam16, 10, &mut rng).unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.quantization_distortion > 0.0);
        assert!(a.bit_errors <= a.bits);
    }
}
