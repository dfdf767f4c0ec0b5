//! Rayleigh MIMO channels, eigen-mode extraction and effective per-stream
//! downlink vectors.

use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::random::complex_gaussian;
use crate::stats::MeanEstimator;

/// Antenna and stream layout of one receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UserConfig {
    pub receive_antennas: usize,
    pub streams: usize,
}

/// Downlink system: base-station array, users, power and feedback budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    transmit_antennas: usize,
    users: Vec<UserConfig>,
    max_power: f64,
    noise_variance: f64,
    feedback_bits: u32,
}

impl SystemConfig {
    pub fn new(
        transmit_antennas: usize,
        users: Vec<UserConfig>,
        max_power: f64,
        noise_variance: f64,
        feedback_bits: u32,
    ) -> Result<Self> {
        if transmit_antennas == 0 {
            return Err(Error::InvalidConfig("at least one transmit antenna is required"));
        }
        if users.is_empty() {
            return Err(Error::InvalidConfig("at least one user is required"));
        }
        for u in &users {
            if u.streams == 0 || u.receive_antennas == 0 {
                return Err(Error::InvalidConfig("every user needs an antenna and a stream"));
            }
            if u.streams > u.receive_antennas {
                return Err(Error::InvalidConfig("streams per user exceed its receive antennas"));
            }
        }
        if users.iter().map(|u| u.streams).sum::<usize>() > transmit_antennas {
            return Err(Error::InvalidConfig("total streams exceed transmit antennas"));
        }
        if !(max_power > 0.0 && max_power.is_finite()) {
            return Err(Error::InvalidConfig("total power must be positive"));
        }
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::InvalidConfig("noise variance must be positive"));
        }
        Ok(Self { transmit_antennas, users, max_power, noise_variance, feedback_bits })
    }

    /// `K` identical users with `receive_antennas` and `streams` each.
    pub fn symmetric(
        transmit_antennas: usize,
        user_count: usize,
        receive_antennas: usize,
        streams: usize,
        max_power: f64,
        noise_variance: f64,
        feedback_bits: u32,
    ) -> Result<Self> {
        let users = (0..user_count).map(|_| UserConfig { receive_antennas, streams }).collect();
        Self::new(transmit_antennas, users, max_power, noise_variance, feedback_bits)
    }

    pub fn transmit_antennas(&self) -> usize {
        self.transmit_antennas
    }

    pub fn users(&self) -> &[UserConfig] {
        &self.users
    }

    pub fn user(&self, k: usize) -> Result<&UserConfig> {
        self.users.get(k).ok_or(Error::OutOfRange("user index"))
    }

    pub fn total_streams(&self) -> usize {
        self.users.iter().map(|u| u.streams).sum()
    }

    pub fn total_receive_antennas(&self) -> usize {
        self.users.iter().map(|u| u.receive_antennas).sum()
    }

    pub fn max_power(&self) -> f64 {
        self.max_power
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn feedback_bits(&self) -> u32 {
        self.feedback_bits
    }

    /// Same layout with a different power budget.
    pub fn with_max_power(&self, max_power: f64) -> Result<Self> {
        Self::new(self.transmit_antennas, self.users.clone(), max_power, self.noise_variance, self.feedback_bits)
    }
}

/// Channel `H_k` of one user (`M x N_k`); the physical downlink is `H_k^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix(CMatrix);

impl ChannelMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.as_slice().iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::OutOfRange("channel entries must be finite"));
        }
        Ok(Self(entries))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn transmit_antennas(&self) -> usize {
        self.0.rows()
    }

    pub fn receive_antennas(&self) -> usize {
        self.0.cols()
    }
}

/// One singular mode of `H_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenMode {
    pub sigma: f64,
    /// Right singular vector (`N_k` entries, receive combining direction).
    pub v: Vec<Complex64>,
    /// `H_k v / |H_k v|` (`M` entries).
    pub u: Vec<Complex64>,
    /// Wishart eigenvalue `sigma^2`.
    pub lambda: f64,
}

/// Effective downlink vector of one stream split into gain and shape.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    pub z: Vec<Complex64>,
    pub gain: f64,
    pub shape: Vec<Complex64>,
}

impl EffectiveChannel {
    pub fn new(z: Vec<Complex64>) -> Result<Self> {
        let gain = linalg::norm(&z);
        if !(gain > 0.0) {
            return Err(Error::OutOfRange("effective channel must be nonzero"));
        }
        let shape = z.iter().map(|x| x / gain).collect();
        Ok(Self { z, gain, shape })
    }
}

/// Monte Carlo statistics of the `e`-th ordered eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenStats {
    pub order: usize,
    /// Mean of the `order`-th largest eigenvalue of `H_k^H H_k`.
    pub lambda_tilde: f64,
    /// Mean squared gain of the corresponding effective channel.
    pub mean_gain_sq: f64,
    pub lambda_std_error: f64,
    pub trials: u64,
}

/// Draws `H_k` with iid unit-variance circular complex Gaussian entries.
pub fn sample_channel<R: Rng + ?Sized>(config: &SystemConfig, k: usize, rng: &mut R) -> Result<ChannelMatrix> {
    let n = config.user(k)?.receive_antennas;
    let m = config.transmit_antennas();
    Ok(ChannelMatrix(CMatrix::from_fn(m, n, |_, _| complex_gaussian(rng))))
}

/// The `count` strongest singular modes of `H`, sorted by descending sigma.
pub fn dominant_modes(h: &ChannelMatrix, count: usize) -> Result<Vec<EigenMode>> {
    let available = h.transmit_antennas().min(h.receive_antennas());
    if count == 0 || count > available {
        return Err(Error::TooManyModes { requested: count, available });
    }
    Ok(h.0
        .svd()
        .into_iter()
        .take(count)
        .map(|t| EigenMode { sigma: t.sigma, lambda: t.sigma * t.sigma, v: t.right, u: t.left })
        .collect())
}

/// Effective per-stream channels `z_i = H_k v_i = sigma_i u_i`.
///
/// The gain of each vector is the singular value of its mode.
pub fn effective_channel(h: &ChannelMatrix, modes: &[EigenMode]) -> Result<Vec<EffectiveChannel>> {
    modes.iter().map(|mode| EffectiveChannel::new(h.0.matvec(&mode.v)?)).collect()
}

/// Estimates the mean of the `order`-th eigenvalue of user `k`'s Wishart
/// matrix together with the second moment of the quantized gain.
pub fn estimate_eigen_stats<R: Rng + ?Sized>(
    config: &SystemConfig,
    k: usize,
    order: usize,
    trials: u64,
    rng: &mut R,
) -> Result<EigenStats> {
    if trials == 0 {
        return Err(Error::ZeroTrials);
    }
    let user = config.user(k)?;
    let available = config.transmit_antennas().min(user.receive_antennas);
    if order >= available {
        return Err(Error::TooManyModes { requested: order + 1, available });
    }
    let mut lambda = MeanEstimator::default();
    let mut gain_sq = MeanEstimator::default();
    for _ in 0..trials {
        let h = sample_channel(config, k, rng)?;
        let modes = dominant_modes(&h, order + 1)?;
        let mode = &modes[order];
        lambda.push(mode.lambda);
        let z = h.0.matvec(&mode.v)?;
        gain_sq.push(linalg::norm_sq(&z));
    }
    Ok(EigenStats {
        order,
        lambda_tilde: lambda.mean(),
        mean_gain_sq: gain_sq.mean(),
        lambda_std_error: lambda.std_error(),
        trials,
    })
}
