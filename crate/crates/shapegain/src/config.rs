//! Experiment configuration: a flat TOML file of scalar and list keys.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use shapegain_core::channel::{SystemConfig, UserConfig};
use shapegain_core::modulation::Modulation;

pub const SEED_ENV: &str = "SHAPEGAIN_SEED";
pub const OUT_DIR_ENV: &str = "SHAPEGAIN_OUT_DIR";

/// How the base station sets the quantization error variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaE2Source {
    /// Distortion model evaluated at the configured split.
    Analytic,
    /// Mean `|z - z_hat|^2` measured on calibration draws.
    Empirical,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PerUser {
    Same(usize),
    Each(Vec<usize>),
}

impl PerUser {
    fn expand(&self, users: usize, key: &str) -> Result<Vec<usize>> {
        match self {
            PerUser::Same(v) => Ok(vec![*v; users]),
            PerUser::Each(v) if v.len() == users => Ok(v.clone()),
            PerUser::Each(v) => bail!("{key} lists {} values for K = {users} users", v.len()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "N_k")]
    n_k: PerUser,
    #[serde(rename = "L_k")]
    l_k: PerUser,
    #[serde(rename = "B")]
    b: u32,
    #[serde(rename = "B_s_list")]
    b_s_list: Vec<u32>,
    snr_db_list: Vec<f64>,
    trials: u64,
    master_seed: u64,
    modulation: String,
    sigma2: f64,
    training_samples: usize,
    #[serde(rename = "sigmaE2_source")]
    sigma_e2_source: String,
    #[serde(rename = "B_g_list", default = "default_gain_bits")]
    b_g_list: Vec<u32>,
    #[serde(default = "default_queries")]
    queries: usize,
    #[serde(default = "default_symbols")]
    symbols_per_trial: usize,
    #[serde(rename = "ccdf_B_s", default = "default_ccdf_bits")]
    ccdf_b_s: u32,
    #[serde(default = "default_ccdf_b_max")]
    ccdf_b_max: f64,
    #[serde(default = "default_ccdf_points")]
    ccdf_points: usize,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

fn default_gain_bits() -> Vec<u32> {
    (6..=10).collect()
}
fn default_queries() -> usize {
    10_000
}
fn default_symbols() -> usize {
    4
}
fn default_ccdf_bits() -> u32 {
    10
}
fn default_ccdf_b_max() -> f64 {
    0.25
}
fn default_ccdf_points() -> usize {
    101
}

/// Everything one run of an experiment needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub system: SystemConfig,
    pub shape_bits: Vec<u32>,
    pub gain_bits: Vec<u32>,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    pub master_seed: u64,
    pub modulation: Modulation,
    pub sigma2: f64,
    pub training_samples: usize,
    pub sigma_e2_source: SigmaE2Source,
    /// Shape queries per point of the shape-distortion curve.
    pub queries: usize,
    pub symbols_per_trial: usize,
    pub ccdf_shape_bits: u32,
    pub ccdf_b_max: f64,
    pub ccdf_points: usize,
    pub output_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).context("malformed configuration")?;
        Self::from_raw(raw)
    }

    /// Reads a configuration file, then applies environment overrides.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut spec = Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))?;
        spec.apply_env()?;
        Ok(spec)
    }

    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(seed) = std::env::var(SEED_ENV) {
            self.master_seed =
                seed.trim().parse().with_context(|| format!("{SEED_ENV} must be an unsigned integer"))?;
        }
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            self.output_dir = PathBuf::from(dir);
        }
        Ok(())
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        if raw.k == 0 {
            bail!("K must be at least 1");
        }
        let n = raw.n_k.expand(raw.k, "N_k")?;
        let l = raw.l_k.expand(raw.k, "L_k")?;
        let users =
            n.iter().zip(&l).map(|(&receive_antennas, &streams)| UserConfig { receive_antennas, streams }).collect();
        if !(raw.sigma2 > 0.0 && raw.sigma2.is_finite()) {
            bail!("sigma2 must be positive");
        }
        let system = SystemConfig::new(raw.m, users, raw.sigma2, raw.sigma2, raw.b)
            .map_err(|e| anyhow::anyhow!("invalid system: {e}"))?;
        if raw.b_s_list.is_empty() {
            bail!("B_s_list must not be empty");
        }
        if let Some(bs) = raw.b_s_list.iter().find(|&&bs| bs > raw.b) {
            bail!("B_s = {bs} exceeds the feedback budget B = {}", raw.b);
        }
        if raw.b > 30 {
            bail!("B must be at most 30");
        }
        if raw.b_g_list.iter().any(|&b| b > 20) {
            bail!("B_g_list entries must be at most 20");
        }
        if raw.snr_db_list.is_empty() || raw.snr_db_list.iter().any(|s| !s.is_finite()) {
            bail!("snr_db_list must hold finite values");
        }
        if raw.trials == 0 {
            bail!("trials must be at least 1");
        }
        if raw.training_samples == 0 {
            bail!("training_samples must be at least 1");
        }
        if raw.queries == 0 {
            bail!("queries must be at least 1");
        }
        if !(raw.ccdf_b_max > 0.0 && raw.ccdf_b_max <= 4.0) || raw.ccdf_points < 2 {
            bail!("ccdf grid must cover (0, ccdf_b_max] with at least 2 points, ccdf_b_max <= 4");
        }
        if raw.ccdf_b_s > 24 {
            bail!("ccdf_B_s must be at most 24");
        }
        let modulation = match raw.modulation.to_ascii_uppercase().replace(['-', '_'], "").as_str() {
            "QPSK" => Modulation::Qpsk,
            "16QAM" | "QAM16" => Modulation::Qam16,
            other => bail!("unknown modulation {other:?} (expected QPSK or 16QAM)"),
        };
        let sigma_e2_source = match raw.sigma_e2_source.as_str() {
            "analytic" => SigmaE2Source::Analytic,
            "empirical" => SigmaE2Source::Empirical,
            other => bail!("sigmaE2_source must be analytic or empirical, got {other:?}"),
        };
        Ok(Self {
            system,
            shape_bits: raw.b_s_list,
            gain_bits: raw.b_g_list,
            snr_db: raw.snr_db_list,
            trials: raw.trials,
            master_seed: raw.master_seed,
            modulation,
            sigma2: raw.sigma2,
            training_samples: raw.training_samples,
            sigma_e2_source,
            queries: raw.queries,
            symbols_per_trial: raw.symbols_per_trial,
            ccdf_shape_bits: raw.ccdf_b_s,
            ccdf_b_max: raw.ccdf_b_max,
            ccdf_points: raw.ccdf_points,
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from(".")),
        })
    }

    pub fn transmit_antennas(&self) -> usize {
        self.system.transmit_antennas()
    }

    pub fn feedback_bits(&self) -> u32 {
        self.system.feedback_bits()
    }

    pub fn set_trials(&mut self, trials: u64) -> Result<()> {
        if trials == 0 {
            bail!("trials must be at least 1");
        }
        self.trials = trials;
        Ok(())
    }

    /// Transmit power for an SNR point, `P_max = sigma^2 10^(snr/10)`.
    pub fn max_power(&self, snr_db: f64) -> f64 {
        self.sigma2 * 10f64.powf(snr_db / 10.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub const SAMPLE: &str = r#"
M = 2
K = 2
N_k = [2, 2]
L_k = 1
B = 16
B_s_list = [12, 13, 16]
snr_db_list = [0, 10, 20]
trials = 100
master_seed = 7
modulation = "16QAM"
sigma2 = 1.0
training_samples = 5000
sigmaE2_source = "analytic"
"#;

    #[test]
    fn parses_sample() {
        let spec = ExperimentSpec::from_toml_str(SAMPLE).unwrap();
        assert_eq!(spec.transmit_antennas(), 2);
        assert_eq!(spec.system.users().len(), 2);
        assert_eq!(spec.system.total_streams(), 2);
        assert_eq!(spec.modulation, Modulation::Qam16);
        assert_eq!(spec.gain_bits, vec![6, 7, 8, 9, 10]);
        assert_eq!(spec.sigma_e2_source, SigmaE2Source::Analytic);
        assert!((spec.max_power(20.0) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_values() {
        let cases = [
            ("B_s_list = [12, 13, 16]", "B_s_list = [17]"),
            ("trials = 100", "trials = 0"),
            ("modulation = \"16QAM\"", "modulation = \"8PSK\""),
            ("sigmaE2_source = \"analytic\"", "sigmaE2_source = \"oracle\""),
            ("N_k = [2, 2]", "N_k = [2]"),
            ("L_k = 1", "L_k = 3"),
            ("sigma2 = 1.0", "sigma2 = 0.0"),
            ("M = 2", "M = 2\nunknown = 1"),
        ];
        for (from, to) in cases {
            let text = SAMPLE.replace(from, to);
            assert!(ExperimentSpec::from_toml_str(&text).is_err(), "{to}");
        }
        assert!(ExperimentSpec::from_toml_str("M = ").is_err());
    }
}
