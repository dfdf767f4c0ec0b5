//! Scalar quantization of the channel gain: high-resolution distortion model
//! and Lloyd-Max codebook training.
//!
//! The analytic model treats the gain as a singular value whose squared value
//! (a Wishart eigenvalue) is gamma distributed with shape `L(e)` and scale
//! `beta`. The eigenvalue-domain variants cover the case where the eigenvalue
//! itself is quantized.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::special::{gamma, ln_factorial_minus_one};

/// Shape `L(e) = (M - e)(N_k - e)` and scale `beta = lambda_tilde / L(e)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainPdfParams {
    order: u32,
    beta: f64,
}

impl GainPdfParams {
    pub fn new(order: u32, beta: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::OutOfRange("L(e) must be at least 1"));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::OutOfRange("beta must be positive"));
        }
        Ok(Self { order, beta })
    }

    /// Parameters for the `e`-th eigenvalue of an `M x N_k` channel whose
    /// mean eigenvalue is `lambda_tilde`.
    pub fn for_eigenvalue(m: usize, n: usize, e: usize, lambda_tilde: f64) -> Result<Self> {
        if e >= m.min(n) {
            return Err(Error::OutOfRange("eigenvalue index exceeds channel rank"));
        }
        let order = ((m - e) * (n - e)) as u32;
        Self::new(order, lambda_tilde / order as f64)
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Density of the singular value `r`, obtained from the gamma eigenvalue law
/// through `lambda = r^2`.
pub fn gain_pdf(r: f64, params: &GainPdfParams) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::OutOfRange("gain must be nonnegative"));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let l = params.order as f64;
    let ln = -ln_factorial_minus_one(params.order) + (l - 1.0) * libm::log(r * r)
        - l * libm::log(params.beta)
        - r * r / params.beta
        + libm::log(2.0 * r);
    Ok(libm::exp(ln))
}

/// Gamma density of the eigenvalue itself.
pub fn eigenvalue_pdf(lambda: f64, params: &GainPdfParams) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::OutOfRange("eigenvalue must be nonnegative"));
    }
    let l = params.order as f64;
    if lambda == 0.0 {
        return Ok(if params.order == 1 { 1.0 / params.beta } else { 0.0 });
    }
    let ln = -ln_factorial_minus_one(params.order) + (l - 1.0) * libm::log(lambda)
        - l * libm::log(params.beta)
        - lambda / params.beta;
    Ok(libm::exp(ln))
}

/// `||f_g||_{1/3} = (int f_g^{1/3})^3` of the singular-value density.
pub fn third_power_norm(params: &GainPdfParams) -> f64 {
    let l = params.order as f64;
    let g = gamma((l + 1.0) / 3.0);
    3.0 * libm::exp(l * libm::log(3.0) - ln_factorial_minus_one(params.order)) * params.beta / 4.0 * g * g * g
}

/// `||f||_{1/3}` of the gamma eigenvalue density:
/// `3^(L+2) beta^2 Gamma^3((L+2)/3) / (L-1)!`.
pub fn eigenvalue_third_power_norm(params: &GainPdfParams) -> f64 {
    let l = params.order as f64;
    let g = gamma((l + 2.0) / 3.0);
    libm::exp((l + 2.0) * libm::log(3.0) - ln_factorial_minus_one(params.order)) * params.beta * params.beta * g * g * g
}

/// High-resolution gain distortion `D_g = K_g 2^(-2 B_g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainDistortionModel {
    pub kg: f64,
    pub norm13: f64,
}

impl GainDistortionModel {
    /// Bennett's integral: `K_g = ||f||_{1/3} / 12`.
    pub fn from_norm(norm13: f64) -> Result<Self> {
        if !(norm13 > 0.0 && norm13.is_finite()) {
            return Err(Error::OutOfRange("pdf norm must be positive"));
        }
        Ok(Self { kg: norm13 / 12.0, norm13 })
    }
}

/// `K_g = 3^L beta Gamma^3((L+1)/3) / (16 (L-1)!)`, stored with the norm it
/// derives from.
pub fn kg_constant(params: &GainPdfParams) -> GainDistortionModel {
    let l = params.order as f64;
    let g = gamma((l + 1.0) / 3.0);
    let kg = libm::exp(l * libm::log(3.0) - ln_factorial_minus_one(params.order)) * params.beta * g * g * g / 16.0;
    GainDistortionModel { kg, norm13: third_power_norm(params) }
}

pub fn analytic_gain_distortion(bits: u32, model: &GainDistortionModel) -> f64 {
    model.kg * libm::exp2(-2.0 * bits as f64)
}

/// Sorted scalar reconstruction levels.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCodebook {
    centroids: Vec<f64>,
    bits: u32,
}

impl GainCodebook {
    /// Accepts `2^bits` finite, nonnegative, ascending levels. Repeated levels
    /// are allowed; they only occur when training data has fewer distinct
    /// values than cells.
    pub fn new(centroids: Vec<f64>, bits: u32) -> Result<Self> {
        if bits >= 31 || centroids.len() != 1usize << bits {
            return Err(Error::InvalidCodebook("gain codebook must hold 2^B_g levels"));
        }
        if centroids.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidCodebook("gain levels must be finite and nonnegative"));
        }
        if centroids.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidCodebook("gain levels must be ascending"));
        }
        Ok(Self { centroids, bits })
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.centroids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }
}

/// Nearest level in squared error; ties go to the lower index.
pub fn quantize_gain(g: f64, codebook: &GainCodebook) -> Result<(usize, f64)> {
    if !(g >= 0.0) {
        return Err(Error::OutOfRange("gain must be nonnegative"));
    }
    Ok(nearest_level(g, &codebook.centroids))
}

fn nearest_level(g: f64, levels: &[f64]) -> (usize, f64) {
    // first level >= g; the answer is it or its left neighbour
    let hi = levels.partition_point(|&c| c < g);
    if hi == 0 {
        return (0, levels[0]);
    }
    if hi == levels.len() {
        let last = levels.len() - 1;
        let first_equal = levels.partition_point(|&c| c < levels[last]);
        return (first_equal, levels[last]);
    }
    let lo = hi - 1;
    let (dl, dh) = ((g - levels[lo]) * (g - levels[lo]), (g - levels[hi]) * (g - levels[hi]));
    let pick = if dl <= dh { lo } else { hi };
    let first_equal = levels.partition_point(|&c| c < levels[pick]);
    (first_equal, levels[pick])
}

/// Mean squared gain error over `samples`.
pub fn empirical_gain_distortion(codebook: &GainCodebook, samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::OutOfRange("need at least one sample"));
    }
    let mut acc = crate::stats::CompensatedSum::default();
    for &g in samples {
        let (_, q) = quantize_gain(g, codebook)?;
        acc.add((g - q) * (g - q));
    }
    Ok(acc.value() / samples.len() as f64)
}

/// Lloyd iteration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// Lloyd iterations allowed per codebook size.
    pub max_iters: usize,
    /// Stop once the relative distortion change falls below this.
    pub tolerance: f64,
    pub min_samples_per_cell: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self { max_iters: 20_000, tolerance: 1e-9, min_samples_per_cell: 10 }
    }
}

/// Trains a `2^bits`-level Lloyd-Max quantizer by 1-D K-means.
///
/// Codebooks grow by splitting every level in two (starting from the sample
/// mean), each size refined by Lloyd iterations until the cell partition
/// stops changing, the relative distortion change drops below the tolerance,
/// or the iteration budget is spent. Empty cells are re-seeded at the sample
/// farthest from its centroid.
pub fn train_gain_codebook(samples: &[f64], bits: u32, options: &TrainOptions) -> Result<GainCodebook> {
    train_gain_codebook_traced(samples, bits, options, |_, _| {})
}

/// As [`train_gain_codebook`], reporting `(codebook size, centroids)` after
/// every Lloyd update.
pub fn train_gain_codebook_traced<F: FnMut(usize, &[f64])>(
    samples: &[f64],
    bits: u32,
    options: &TrainOptions,
    mut trace: F,
) -> Result<GainCodebook> {
    if bits >= 31 {
        return Err(Error::OutOfRange("too many gain bits"));
    }
    let target = 1usize << bits;
    let required = target.saturating_mul(options.min_samples_per_cell.max(1));
    if samples.len() < required {
        return Err(Error::TooFewSamples { required, provided: samples.len() });
    }
    if samples.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::OutOfRange("gain samples must be finite and nonnegative"));
    }
    let data = SortedSamples::new(samples);
    let mut centroids = alloc::vec![data.mean()];
    let spread = data.std_dev();
    loop {
        data.lloyd(&mut centroids, options, &mut trace);
        if centroids.len() == target {
            break;
        }
        let eps = 1e-3 * spread;
        let mut split = Vec::with_capacity(centroids.len() * 2);
        for &c in &centroids {
            split.push((c - eps).max(0.0));
            split.push(c + eps);
        }
        split.sort_by(f64::total_cmp);
        centroids = split;
    }
    GainCodebook::new(centroids, bits)
}

struct SortedSamples {
    x: Vec<f64>,
    offset: f64,
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl SortedSamples {
    fn new(samples: &[f64]) -> Self {
        let mut x = samples.to_vec();
        x.sort_by(f64::total_cmp);
        let offset = x.iter().sum::<f64>() / x.len() as f64;
        let mut s1 = Vec::with_capacity(x.len() + 1);
        let mut s2 = Vec::with_capacity(x.len() + 1);
        let (mut a, mut b) = (0.0, 0.0);
        s1.push(0.0);
        s2.push(0.0);
        for &v in &x {
            let d = v - offset;
            a += d;
            b += d * d;
            s1.push(a);
            s2.push(b);
        }
        Self { x, offset, s1, s2 }
    }

    fn mean(&self) -> f64 {
        self.offset + self.s1[self.x.len()] / self.x.len() as f64
    }

    fn std_dev(&self) -> f64 {
        let n = self.x.len() as f64;
        let m = self.s1[self.x.len()] / n;
        libm::sqrt((self.s2[self.x.len()] / n - m * m).max(0.0))
    }

    /// End index (exclusive) of every cell under nearest-level assignment.
    fn cell_ends(&self, c: &[f64], ends: &mut Vec<usize>) {
        ends.clear();
        for k in 0..c.len() - 1 {
            let (lo, hi) = (c[k], c[k + 1]);
            ends.push(self.x.partition_point(|&v| (v - lo) * (v - lo) <= (v - hi) * (v - hi)));
        }
        ends.push(self.x.len());
    }

    fn lloyd<F: FnMut(usize, &[f64])>(&self, c: &mut [f64], options: &TrainOptions, trace: &mut F) {
        let mut ends = Vec::with_capacity(c.len());
        let mut prev_ends: Vec<usize> = Vec::new();
        let mut prev_distortion = f64::INFINITY;
        for _ in 0..options.max_iters {
            self.cell_ends(c, &mut ends);
            if ends == prev_ends {
                break;
            }
            let mut distortion = 0.0;
            let mut empty = Vec::new();
            let mut start = 0;
            for (k, &end) in ends.iter().enumerate() {
                let count = end - start;
                if count == 0 {
                    empty.push(k);
                } else {
                    let sum = self.s1[end] - self.s1[start];
                    let sq = self.s2[end] - self.s2[start];
                    c[k] = self.offset + sum / count as f64;
                    distortion += (sq - sum * sum / count as f64).max(0.0);
                }
                start = end;
            }
            if !empty.is_empty() {
                self.reseed(c, &ends, &empty);
                c.sort_by(f64::total_cmp);
            }
            trace(c.len(), c);
            let distortion = distortion / self.x.len() as f64;
            let change = prev_distortion - distortion;
            if empty.is_empty() && distortion > 0.0 && libm::fabs(change) <= options.tolerance * distortion {
                break;
            }
            if distortion == 0.0 && empty.is_empty() {
                break;
            }
            prev_distortion = distortion;
            core::mem::swap(&mut prev_ends, &mut ends);
        }
    }

    /// Moves each empty cell's centroid to the worst-represented sample.
    fn reseed(&self, c: &mut [f64], ends: &[usize], empty: &[usize]) {
        let mut candidates: Vec<(f64, f64)> = Vec::new();
        let mut start = 0;
        for (k, &end) in ends.iter().enumerate() {
            if end > start {
                for v in [self.x[start], self.x[end - 1]] {
                    candidates.push((libm::fabs(v - c[k]), v));
                }
            }
            start = end;
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0));
        for (i, &k) in empty.iter().enumerate() {
            c[k] = candidates[i % candidates.len()].1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_to_infinity;
    use alloc::vec;

    #[test]
    fn rayleigh_density_value() {
        let p = GainPdfParams::new(1, 1.0).unwrap();
        let v = gain_pdf(1.0, &p).unwrap();
        assert!((v - 2.0 * libm::exp(-1.0)).abs() < 1e-15);
        assert!((v - 0.735_758_882_342_884_6).abs() < 1e-12);
        assert!(gain_pdf(-0.1, &p).is_err());
        assert_eq!(gain_pdf(0.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn densities_normalize() {
        for (l, beta) in [(1, 1.0), (4, 0.9)] {
            let p = GainPdfParams::new(l, beta).unwrap();
            let total = integrate_to_infinity(|r| gain_pdf(r, &p).unwrap(), 0.0, 1e-12);
            assert!((total - 1.0).abs() < 1e-8, "L={l}");
            let total = integrate_to_infinity(|x| eigenvalue_pdf(x, &p).unwrap(), 0.0, 1e-12);
            assert!((total - 1.0).abs() < 1e-8, "L={l}");
        }
    }

    fn numeric_norm13(f: impl Fn(f64) -> f64) -> f64 {
        let v = integrate_to_infinity(|r| libm::cbrt(f(r)), 0.0, 1e-13);
        v * v * v
    }

    #[test]
    fn third_power_norm_closed_form() {
        let p = GainPdfParams::new(1, 1.0).unwrap();
        let g = gamma(2.0 / 3.0);
        assert!((third_power_norm(&p) - 2.25 * g * g * g).abs() < 1e-12);
        assert!((third_power_norm(&p) - 5.586_6).abs() < 1e-3);
        for (l, beta) in [(1, 1.0), (2, 0.5), (4, 0.875), (9, 2.3)] {
            let p = GainPdfParams::new(l, beta).unwrap();
            let oracle = numeric_norm13(|r| gain_pdf(r, &p).unwrap());
            assert!((third_power_norm(&p) - oracle).abs() / oracle < 1e-6, "L={l}");
            let oracle = numeric_norm13(|x| eigenvalue_pdf(x, &p).unwrap());
            assert!((eigenvalue_third_power_norm(&p) - oracle).abs() / oracle < 1e-6, "L={l}");
            let doubled = GainPdfParams::new(l, 2.0 * beta).unwrap();
            assert!((third_power_norm(&doubled) / third_power_norm(&p) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kg_constant_matches_bennett() {
        let p = GainPdfParams::new(1, 1.0).unwrap();
        let model = kg_constant(&p);
        let g = gamma(2.0 / 3.0);
        assert!((model.kg - 3.0 / 16.0 * g * g * g).abs() < 1e-14);
        assert!((model.kg - 0.465_554_733_977_855).abs() < 1e-12);
        assert!((model.kg - third_power_norm(&p) / 12.0).abs() < 1e-12);
        assert!((analytic_gain_distortion(3, &model) - model.kg / 64.0).abs() < 1e-15);
        assert!((analytic_gain_distortion(3, &model) - 0.007_28).abs() < 1e-5);
        assert_eq!(analytic_gain_distortion(0, &model), model.kg);
        for b in 0..12 {
            let ratio = analytic_gain_distortion(b, &model) / analytic_gain_distortion(b + 1, &model);
            assert_eq!(ratio, 4.0);
        }
        let from_norm = GainDistortionModel::from_norm(model.norm13).unwrap();
        assert!((from_norm.kg - model.kg).abs() < 1e-15);
    }

    #[test]
    fn quantize_nearest_with_ties() {
        let cb = GainCodebook::new(vec![1.0, 2.0], 1).unwrap();
        assert_eq!(quantize_gain(1.2, &cb).unwrap(), (0, 1.0));
        assert_eq!(quantize_gain(1.5, &cb).unwrap(), (0, 1.0));
        assert_eq!(quantize_gain(1.6, &cb).unwrap(), (1, 2.0));
        assert_eq!(quantize_gain(2.0, &cb).unwrap(), (1, 2.0));
        assert_eq!(quantize_gain(0.0, &cb).unwrap(), (0, 1.0));
        assert_eq!(quantize_gain(9.0, &cb).unwrap(), (1, 2.0));
        assert!(quantize_gain(-1.0, &cb).is_err());
        let dup = GainCodebook::new(vec![1.0, 1.0, 3.0, 3.0], 2).unwrap();
        assert_eq!(quantize_gain(3.5, &dup).unwrap(), (2, 3.0));
        assert_eq!(quantize_gain(0.5, &dup).unwrap(), (0, 1.0));
    }

    #[test]
    fn codebook_validation() {
        assert!(GainCodebook::new(vec![1.0, 2.0, 3.0], 1).is_err());
        assert!(GainCodebook::new(vec![2.0, 1.0], 1).is_err());
        assert!(GainCodebook::new(vec![-1.0, 1.0], 1).is_err());
        assert!(GainCodebook::new(vec![f64::NAN, 1.0], 1).is_err());
    }

    #[test]
    fn members_have_zero_distortion() {
        let cb = GainCodebook::new(vec![0.5, 1.0, 2.0, 4.0], 2).unwrap();
        assert_eq!(empirical_gain_distortion(&cb, &[0.5, 4.0, 2.0, 1.0, 1.0]).unwrap(), 0.0);
        assert!(empirical_gain_distortion(&cb, &[]).is_err());
    }

    /// Best 2-means split of a sorted sample, by enumerating every threshold.
    fn brute_force_two_means(x: &[f64]) -> (f64, f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for split in 1..x.len() {
            let (a, b) = x.split_at(split);
            let ma = a.iter().sum::<f64>() / a.len() as f64;
            let mb = b.iter().sum::<f64>() / b.len() as f64;
            let d =
                a.iter().map(|v| (v - ma) * (v - ma)).sum::<f64>() + b.iter().map(|v| (v - mb) * (v - mb)).sum::<f64>();
            if d < best.0 {
                best = (d, ma, mb);
            }
        }
        (best.0 / x.len() as f64, best.1, best.2)
    }

    #[test]
    fn two_means_of_four_points() {
        let samples = [1.0, 2.0, 3.0, 4.0];
        let opts = TrainOptions { min_samples_per_cell: 1, ..TrainOptions::default() };
        let cb = train_gain_codebook(&samples, 1, &opts).unwrap();
        let (d, lo, hi) = brute_force_two_means(&samples);
        assert_eq!(cb.centroids(), &[lo, hi]);
        assert_eq!(cb.centroids(), &[1.5, 3.5]);
        assert_eq!(empirical_gain_distortion(&cb, &samples).unwrap(), d);
        assert_eq!(d, 0.25);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let samples = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(
            train_gain_codebook(&samples, 1, &TrainOptions::default()),
            Err(Error::TooFewSamples { required: 20, provided: 4 })
        );
    }

    #[test]
    fn constant_samples_are_degenerate_but_exact() {
        let samples = [2.5; 40];
        let cb = train_gain_codebook(&samples, 1, &TrainOptions::default()).unwrap();
        assert_eq!(cb.len(), 2);
        assert_eq!(empirical_gain_distortion(&cb, &samples).unwrap(), 0.0);
        let zeros = [0.0; 40];
        let cb = train_gain_codebook(&zeros, 2, &TrainOptions::default()).unwrap();
        assert_eq!(empirical_gain_distortion(&cb, &zeros).unwrap(), 0.0);
    }

    #[test]
    fn zero_bits_gives_the_mean() {
        let samples: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let cb = train_gain_codebook(&samples, 0, &TrainOptions::default()).unwrap();
        let mean = samples.iter().sum::<f64>() / 50.0;
        assert!((cb.centroids()[0] - mean).abs() < 1e-12);
    }

    #[test]
    fn trained_levels_satisfy_lloyd_conditions() {
        let mut state = 0x1234_5678_u64;
        let samples: Vec<f64> = (0..5000)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let u = ((state >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
                libm::sqrt(-libm::log(u))
            })
            .collect();
        let cb = train_gain_codebook(&samples, 3, &TrainOptions::default()).unwrap();
        assert!(cb.centroids().windows(2).all(|w| w[0] < w[1]));
        for (k, &c) in cb.centroids().iter().enumerate() {
            let cell: Vec<f64> = samples.iter().copied().filter(|&g| quantize_gain(g, &cb).unwrap().0 == k).collect();
            let mean = cell.iter().sum::<f64>() / cell.len() as f64;
            assert!((mean - c).abs() < 1e-9, "cell {k}");
        }
    }
}
