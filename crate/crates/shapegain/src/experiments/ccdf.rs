//! Distribution of the RVQ minimum squared distance.

use anyhow::{bail, Result};
use shapegain_core::random::SeedSequence;
use shapegain_core::shape::{
    approx_min_ccdf, approx_min_ccdf_linear, approx_min_ccdf_truncated, exact_min_ccdf, sample_min_sqdist,
};

use super::{chunked, core_err};
use crate::config::ExperimentSpec;
use crate::report::Table;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcdfPoint {
    pub b: f64,
    pub monte_carlo: f64,
    pub exact: f64,
    /// Small-angle cap law in the exact angle.
    pub approx: f64,
    /// Also with `theta ~ sqrt(b)`.
    pub approx_sin: f64,
    /// Also truncated at `b > 1`.
    pub approx_psi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcdfCurve {
    pub shape_bits: u32,
    pub trials: u64,
    pub points: Vec<CcdfPoint>,
}

impl CcdfCurve {
    pub fn table(&self) -> Result<Table> {
        let mut t = Table::new(&["b", "monte_carlo", "exact", "approx", "approx_sin", "approx_psi"]);
        for p in &self.points {
            t.push(vec![
                p.b.into(),
                p.monte_carlo.into(),
                p.exact.into(),
                p.approx.into(),
                p.approx_sin.into(),
                p.approx_psi.into(),
            ])?;
        }
        Ok(t)
    }

    /// Largest absolute difference between two columns over the grid.
    pub fn sup_gap(&self, f: impl Fn(&CcdfPoint) -> f64, g: impl Fn(&CcdfPoint) -> f64) -> f64 {
        self.points.iter().fold(0.0f64, |a, p| a.max((f(p) - g(p)).abs()))
    }
}

/// Monte Carlo CCDF from `trials` fresh codebooks and queries, next to the
/// analytic forms on a uniform grid over `[0, ccdf_b_max]`.
pub fn ccdf_compare(spec: &ExperimentSpec) -> Result<CcdfCurve> {
    let m = spec.transmit_antennas();
    let bits = spec.ccdf_shape_bits;
    if bits > 24 {
        bail!("ccdf_B_s must be at most 24");
    }
    let n = 1usize << bits;
    let seeds = SeedSequence::new(spec.master_seed, "ccdf");
    let parts = chunked(spec.trials, |range| {
        Ok(range.map(|i| sample_min_sqdist(m, n, &mut seeds.stream(0, i))).collect::<Vec<f64>>())
    })?;
    let mut samples: Vec<f64> = parts.into_iter().flatten().collect();
    samples.sort_by(f64::total_cmp);
    let total = samples.len() as f64;
    let mut points = Vec::with_capacity(spec.ccdf_points);
    for j in 0..spec.ccdf_points {
        let b = spec.ccdf_b_max * j as f64 / (spec.ccdf_points - 1) as f64;
        let below = samples.partition_point(|&x| x < b);
        let mm = m as u32;
        let nn = n as u64;
        points.push(CcdfPoint {
            b,
            monte_carlo: (samples.len() - below) as f64 / total,
            exact: exact_min_ccdf(b, mm, nn).map_err(core_err)?,
            approx: approx_min_ccdf(b, mm, nn).map_err(core_err)?,
            approx_sin: approx_min_ccdf_linear(b, mm, nn).map_err(core_err)?,
            approx_psi: approx_min_ccdf_truncated(b, mm, nn).map_err(core_err)?,
        });
    }
    Ok(CcdfCurve { shape_bits: bits, trials: spec.trials, points })
}
