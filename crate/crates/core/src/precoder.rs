//! Base-station side of the limited-feedback downlink: virtual uplink power
//! allocation against the quantized channels and the MMSE precoder.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{norm_sq, CMatrix};

/// Which user and stream a column belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamLabel {
    pub user: usize,
    pub stream: usize,
}

/// Fed-back channel vectors, one column per stream.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedCsi {
    columns: Vec<Vec<Complex64>>,
    labels: Vec<StreamLabel>,
}

impl QuantizedCsi {
    pub fn new(columns: Vec<Vec<Complex64>>, labels: Vec<StreamLabel>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidConfig("need at least one stream"));
        }
        if columns.len() != labels.len() {
            return Err(Error::DimensionMismatch { expected: columns.len(), found: labels.len() });
        }
        let m = columns[0].len();
        if let Some(bad) = columns.iter().find(|c| c.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, found: bad.len() });
        }
        if m == 0 || columns.iter().flatten().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::OutOfRange("channel columns must be finite and nonempty"));
        }
        Ok(Self { columns, labels })
    }

    pub fn transmit_antennas(&self) -> usize {
        self.columns[0].len()
    }

    pub fn streams(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, i: usize) -> &[Complex64] {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[Vec<Complex64>] {
        &self.columns
    }

    pub fn labels(&self) -> &[StreamLabel] {
        &self.labels
    }

    pub fn as_matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.transmit_antennas(), self.streams(), |r, c| self.columns[c][r])
    }
}

/// Receiver noise, assumed quantization error variance and power budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub sigma2: f64,
    pub sigma_e2: f64,
    pub max_power: f64,
}

impl NoiseModel {
    pub fn new(sigma2: f64, sigma_e2: f64, max_power: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::OutOfRange("noise variance must be positive"));
        }
        if !(sigma_e2 >= 0.0 && sigma_e2.is_finite()) {
            return Err(Error::OutOfRange("quantization error variance must be nonnegative"));
        }
        if !(max_power > 0.0 && max_power.is_finite()) {
            return Err(Error::OutOfRange("power budget must be positive"));
        }
        Ok(Self { sigma2, sigma_e2, max_power })
    }

    /// `sigma^2 + sigma_E^2 P_max / M`
    pub fn regularizer(&self, m: usize) -> f64 {
        self.sigma2 + self.sigma_e2 * self.max_power / m as f64
    }
}

fn check_powers(csi: &QuantizedCsi, q: &[f64]) -> Result<()> {
    if q.len() != csi.streams() {
        return Err(Error::DimensionMismatch { expected: csi.streams(), found: q.len() });
    }
    if q.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
        return Err(Error::OutOfRange("powers must be nonnegative"));
    }
    Ok(())
}

/// `J = F diag(q) F^H + (sigma^2 + sigma_E^2 P_max / M) I`.
pub fn build_j(csi: &QuantizedCsi, q: &[f64], noise: &NoiseModel) -> Result<CMatrix> {
    check_powers(csi, q)?;
    Ok(build_j_unchecked(csi, q, noise))
}

fn build_j_unchecked(csi: &QuantizedCsi, q: &[f64], noise: &NoiseModel) -> CMatrix {
    let m = csi.transmit_antennas();
    let rho = noise.regularizer(m);
    let mut j = CMatrix::zeros(m, m);
    for (f, &p) in csi.columns.iter().zip(q) {
        for r in 0..m {
            let a = f[r] * p;
            for c in 0..m {
                j[(r, c)] += a * f[c].conj();
            }
        }
    }
    for i in 0..m {
        j[(i, i)] += rho;
    }
    j
}

/// `L - M + (sigma^2 + sigma_E^2 P_max / M) tr(J^-1)`.
pub fn predicted_smse(csi: &QuantizedCsi, q: &[f64], noise: &NoiseModel) -> Result<f64> {
    check_powers(csi, q)?;
    let m = csi.transmit_antennas();
    let jinv = build_j_unchecked(csi, q, noise).hpd_inverse()?;
    Ok(csi.streams() as f64 - m as f64 + noise.regularizer(m) * jinv.trace().re)
}

/// `rho tr(J^-1)` and its gradient `-rho |J^-1 f_i|^2`.
fn objective_and_gradient(csi: &QuantizedCsi, q: &[f64], noise: &NoiseModel) -> Result<(f64, Vec<f64>)> {
    let rho = noise.regularizer(csi.transmit_antennas());
    let jinv = build_j_unchecked(csi, q, noise).hpd_inverse()?;
    let grad = csi.columns.iter().map(|f| Ok(-rho * norm_sq(&jinv.matvec(f)?))).collect::<Result<Vec<f64>>>()?;
    Ok((rho * jinv.trace().re, grad))
}

/// Gradient of the predicted SMSE with respect to the virtual uplink powers.
pub fn smse_gradient(csi: &QuantizedCsi, q: &[f64], noise: &NoiseModel) -> Result<Vec<f64>> {
    check_powers(csi, q)?;
    Ok(objective_and_gradient(csi, q, noise)?.1)
}

/// Euclidean projection onto `{q >= 0, sum q <= budget}`.
pub fn project_onto_budget(y: &[f64], budget: f64) -> Vec<f64> {
    let clipped: Vec<f64> = y.iter().map(|v| v.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= budget {
        return clipped;
    }
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &v) in u.iter().enumerate() {
        cumulative += v;
        let t = (cumulative - budget) / (j + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

/// Stopping rules for the power optimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub relative_tolerance: f64,
    pub max_iters: usize,
    /// Required scale-free projected-gradient norm, see [`PowerAllocation`].
    pub gradient_tolerance: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self { relative_tolerance: 1e-10, max_iters: 10_000, gradient_tolerance: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub q: Vec<f64>,
    pub iterations: usize,
    /// `|q - Proj(q - tau grad)|_inf / P_max` with `tau = P_max / |grad|_inf`.
    pub projected_gradient: f64,
}

fn scaled_projected_gradient(q: &[f64], grad: &[f64], budget: f64) -> f64 {
    let gmax = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    if gmax == 0.0 {
        return 0.0;
    }
    let tau = budget / gmax;
    let step: Vec<f64> = q.iter().zip(grad).map(|(x, g)| x - tau * g).collect();
    let p = project_onto_budget(&step, budget);
    q.iter().zip(&p).fold(0.0f64, |a, (x, y)| a.max((x - y).abs())) / budget
}

/// Minimizes `tr(J^-1)` over `{q >= 0, sum q <= P_max}` by projected
/// gradient descent with Barzilai-Borwein steps and Armijo backtracking,
/// starting from equal powers.
pub fn optimize_virtual_uplink_power(
    csi: &QuantizedCsi,
    noise: &NoiseModel,
    options: &OptimizerOptions,
) -> Result<PowerAllocation> {
    let budget = noise.max_power;
    let l = csi.streams();
    let mut q = vec![budget / l as f64; l];
    let (mut phi, mut grad) = objective_and_gradient(csi, &q, noise)?;
    let gmax = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    if gmax == 0.0 {
        return Ok(PowerAllocation { q, iterations: 0, projected_gradient: 0.0 });
    }
    let mut t = budget / gmax;
    let mut iterations = 0;
    while iterations < options.max_iters {
        iterations += 1;
        let mut accepted = None;
        for _ in 0..80 {
            let step: Vec<f64> = q.iter().zip(&grad).map(|(x, g)| x - t * g).collect();
            let qn = project_onto_budget(&step, budget);
            let mut lin = 0.0;
            let mut dist = 0.0;
            for ((a, b), g) in qn.iter().zip(&q).zip(&grad) {
                lin += g * (a - b);
                dist += (a - b) * (a - b);
            }
            let (phin, gn) = objective_and_gradient(csi, &qn, noise)?;
            if phin <= phi + lin + dist / (2.0 * t) + 1e-15 * phi.abs() {
                accepted = Some((qn, phin, gn, dist));
                break;
            }
            t *= 0.5;
        }
        let Some((qn, phin, gn, dist)) = accepted else {
            break;
        };
        let change = (phi - phin).abs() / phi.abs().max(f64::MIN_POSITIVE);
        let (mut sy, mut ss) = (0.0, 0.0);
        for i in 0..l {
            let s = qn[i] - q[i];
            sy += s * (gn[i] - grad[i]);
            ss += s * s;
        }
        q = qn;
        phi = phin;
        grad = gn;
        if dist == 0.0 {
            break;
        }
        t = if sy > 0.0 { ss / sy } else { 2.0 * t };
        if change < options.relative_tolerance
            && scaled_projected_gradient(&q, &grad, budget) < options.gradient_tolerance
        {
            break;
        }
    }
    let projected_gradient = scaled_projected_gradient(&q, &grad, budget);
    Ok(PowerAllocation { q, iterations, projected_gradient })
}

/// Largest violation of the KKT conditions for the power problem, relative
/// to the largest partial derivative: active streams share one derivative,
/// idle streams have a derivative no smaller than it.
pub fn kkt_imbalance(csi: &QuantizedCsi, q: &[f64], noise: &NoiseModel) -> Result<f64> {
    let grad = smse_gradient(csi, q, noise)?;
    let scale = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let floor = 1e-12 * noise.max_power;
    let active: Vec<f64> = q.iter().zip(&grad).filter(|(x, _)| **x > floor).map(|(_, g)| *g).collect();
    if active.is_empty() {
        return Ok(1.0);
    }
    let mu = active.iter().sum::<f64>() / active.len() as f64;
    let mut worst = active.iter().fold(0.0f64, |a, g| a.max((g - mu).abs()));
    for (x, g) in q.iter().zip(&grad) {
        if *x <= floor {
            worst = worst.max(mu - g);
        }
    }
    Ok(worst / scale)
}

/// Precoder, powers and the quantities they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSolution {
    /// `M x L`, unit-norm columns.
    pub u: CMatrix,
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub j: CMatrix,
    pub predicted_smse: f64,
}

/// Columns `J^-1 f_l sqrt(q_l)` scaled to unit norm. A stream with no power
/// keeps the direction of its own channel.
pub fn mmse_precoder(csi: &QuantizedCsi, q: &[f64], noise: &NoiseModel) -> Result<PrecoderSolution> {
    check_powers(csi, q)?;
    let m = csi.transmit_antennas();
    let j = build_j_unchecked(csi, q, noise);
    let jinv = j.hpd_inverse()?;
    let mut columns = Vec::with_capacity(csi.streams());
    for (f, &p) in csi.columns.iter().zip(q) {
        let w: Vec<Complex64> = jinv.matvec(f)?.into_iter().map(|x| x * libm::sqrt(p)).collect();
        let n = libm::sqrt(norm_sq(&w));
        let col = if n > 0.0 {
            w.into_iter().map(|x| x / n).collect()
        } else {
            let fn_ = libm::sqrt(norm_sq(f));
            if fn_ > 0.0 {
                f.iter().map(|x| x / fn_).collect()
            } else {
                let mut e = vec![Complex64::new(0.0, 0.0); m];
                e[0] = Complex64::new(1.0, 0.0);
                e
            }
        };
        columns.push(col);
    }
    let predicted = csi.streams() as f64 - m as f64 + noise.regularizer(m) * jinv.trace().re;
    Ok(PrecoderSolution {
        u: CMatrix::from_columns(&columns)?,
        q: q.to_vec(),
        p: downlink_power(q),
        j,
        predicted_smse: predicted,
    })
}

/// Downlink powers equal the virtual uplink powers.
pub fn downlink_power(q: &[f64]) -> Vec<f64> {
    q.to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::inner;
    use crate::random::{complex_gaussian, SeedSequence, SimRng};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn labels(n: usize) -> Vec<StreamLabel> {
        (0..n).map(|i| StreamLabel { user: i, stream: 0 }).collect()
    }

    fn random_csi(m: usize, l: usize, rng: &mut SimRng) -> QuantizedCsi {
        let cols = (0..l).map(|_| (0..m).map(|_| complex_gaussian(rng)).collect()).collect();
        QuantizedCsi::new(cols, labels(l)).unwrap()
    }

    #[test]
    fn j_at_zero_power() {
        let csi = QuantizedCsi::new(vec![vec![c(1.0, 0.0), c(0.0, 2.0)]], labels(1)).unwrap();
        let noise = NoiseModel::new(0.5, 0.2, 10.0).unwrap();
        let j = build_j(&csi, &[0.0], &noise).unwrap();
        let rho = 0.5 + 0.2 * 10.0 / 2.0;
        assert_eq!(j, {
            let mut e = CMatrix::identity(2);
            e[(0, 0)] = c(rho, 0.0);
            e[(1, 1)] = c(rho, 0.0);
            e
        });
        assert!((predicted_smse(&csi, &[0.0], &noise).unwrap() - 1.0).abs() < 1e-14);
        assert!(build_j(&csi, &[0.0, 1.0], &noise).is_err());
        assert!(build_j(&csi, &[-1.0], &noise).is_err());
    }

    #[test]
    fn rank_one_update() {
        let csi = QuantizedCsi::new(vec![vec![c(0.0, 3.0), c(0.0, 0.0), c(0.0, 0.0)]], labels(1)).unwrap();
        let noise = NoiseModel::new(1.0, 0.0, 2.0).unwrap();
        let j = build_j(&csi, &[2.0], &noise).unwrap();
        assert_eq!(j[(0, 0)], c(19.0, 0.0));
        assert_eq!(j[(1, 1)], c(1.0, 0.0));
        assert_eq!(j[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn j_hermitian_and_shifted() {
        let mut rng = SeedSequence::new(1, "j").stream(0, 0);
        for _ in 0..50 {
            let csi = random_csi(4, 3, &mut rng);
            let noise = NoiseModel::new(0.7, 0.1, 5.0).unwrap();
            let j = build_j(&csi, &[1.0, 2.0, 0.5], &noise).unwrap();
            assert!(j.hermitian_defect() < 1e-12);
            // smallest eigenvalue is at least sigma^2: J - sigma^2 I stays PD
            let mut shifted = j.clone();
            for i in 0..4 {
                shifted[(i, i)] -= 0.7 * (1.0 - 1e-9);
            }
            assert!(shifted.cholesky().is_ok());
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = SeedSequence::new(2, "grad").stream(0, 0);
        let csi = random_csi(3, 3, &mut rng);
        let noise = NoiseModel::new(1.0, 0.3, 4.0).unwrap();
        let q = [1.0, 0.7, 2.0];
        let g = smse_gradient(&csi, &q, &noise).unwrap();
        for i in 0..3 {
            let h = 1e-6;
            let mut a = q;
            let mut b = q;
            a[i] += h;
            b[i] -= h;
            let fd =
                (predicted_smse(&csi, &a, &noise).unwrap() - predicted_smse(&csi, &b, &noise).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7, "i={i} {fd} {}", g[i]);
        }
    }

    #[test]
    fn projection() {
        assert_eq!(project_onto_budget(&[0.2, 0.3], 1.0), vec![0.2, 0.3]);
        assert_eq!(project_onto_budget(&[-1.0, 0.5], 1.0), vec![0.0, 0.5]);
        let p = project_onto_budget(&[2.0, 1.0], 1.0);
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1].abs() < 1e-15);
        let p = project_onto_budget(&[1.0, 1.0, 1.0], 1.5);
        assert!(p.iter().all(|x| (x - 0.5).abs() < 1e-15));
    }

    #[test]
    fn single_stream_takes_everything() {
        let csi = QuantizedCsi::new(vec![vec![c(0.3, 0.4), c(-1.0, 0.2)]], labels(1)).unwrap();
        let noise = NoiseModel::new(1.0, 0.05, 7.0).unwrap();
        let sol = optimize_virtual_uplink_power(&csi, &noise, &OptimizerOptions::default()).unwrap();
        assert!((sol.q[0] - 7.0).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for i in 0..=100 {
            let v = predicted_smse(&csi, &[7.0 * i as f64 / 100.0], &noise).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let csi =
            QuantizedCsi::new(vec![vec![c(1.5, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 1.5)]], labels(2)).unwrap();
        let noise = NoiseModel::new(1.0, 0.1, 10.0).unwrap();
        let sol = optimize_virtual_uplink_power(&csi, &noise, &OptimizerOptions::default()).unwrap();
        assert!((sol.q[0] - 5.0).abs() < 1e-6 && (sol.q[1] - 5.0).abs() < 1e-6);
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=10_000 {
            let a = 10.0 * i as f64 / 1e4;
            let v = predicted_smse(&csi, &[a, 10.0 - a], &noise).unwrap();
            if v < best.0 {
                best = (v, a);
            }
        }
        assert!((best.1 - 5.0).abs() <= 1e-3);
    }

    #[test]
    fn precoder_properties() {
        let csi = QuantizedCsi::new(vec![vec![c(1.0, 0.0), c(0.0, 0.0)]], labels(1)).unwrap();
        let noise = NoiseModel::new(1.0, 0.0, 3.0).unwrap();
        let sol = mmse_precoder(&csi, &[3.0], &noise).unwrap();
        assert!((sol.u[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!(sol.u[(1, 0)].norm() < 1e-15);
        assert_eq!(sol.p, vec![3.0]);

        let csi = QuantizedCsi::new(vec![vec![c(0.6, 0.8), c(0.0, 0.0)], vec![c(0.0, 0.0), c(2.0, -1.0)]], labels(2))
            .unwrap();
        let sol = mmse_precoder(&csi, &[1.0, 2.0], &noise).unwrap();
        assert!(inner(&sol.u.column(0), &sol.u.column(1)).norm() < 1e-9);

        let sol = mmse_precoder(&csi, &[0.0, 2.0], &noise).unwrap();
        let u0 = sol.u.column(0);
        assert!((u0[0] - c(0.6, 0.8)).norm() < 1e-15);
        assert_eq!(sol.p, vec![0.0, 2.0]);
    }

    #[test]
    fn downlink_mirror() {
        assert_eq!(downlink_power(&[4.0, 0.0]), vec![4.0, 0.0]);
    }

    #[test]
    fn positive_floor_with_quantization_error() {
        let mut rng = SeedSequence::new(5, "floor").stream(0, 0);
        let csi = random_csi(2, 2, &mut rng);
        let mut prev = f64::INFINITY;
        for db in [0.0, 10.0, 20.0, 30.0, 40.0, 60.0] {
            let p = libm::pow(10.0, db / 10.0);
            let noise = NoiseModel::new(1.0, 0.05, p).unwrap();
            let sol = optimize_virtual_uplink_power(&csi, &noise, &OptimizerOptions::default()).unwrap();
            let v = predicted_smse(&csi, &sol.q, &noise).unwrap();
            assert!(v <= prev + 1e-9);
            prev = v;
        }
        assert!(prev > 0.01);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn optimizer_is_kkt_and_within_budget(seed in any::<u64>(), m in 2usize..=4, db in -5.0f64..40.0, se in 0.0f64..0.3) {
            let mut rng = SeedSequence::new(seed, "opt").stream(0, 0);
            let l = 1 + (seed as usize % m);
            let csi = random_csi(m, l, &mut rng);
            let p = libm::pow(10.0, db / 10.0);
            let noise = NoiseModel::new(1.0, se, p).unwrap();
            let sol = optimize_virtual_uplink_power(&csi, &noise, &OptimizerOptions::default()).unwrap();
            prop_assert!(sol.q.iter().sum::<f64>() <= p * (1.0 + 1e-12) + 1e-9);
            prop_assert!(sol.q.iter().all(|x| *x >= 0.0));
            prop_assert!(sol.projected_gradient < 1e-6);
            prop_assert!(kkt_imbalance(&csi, &sol.q, &noise).unwrap() < 1e-5);
            let equal = vec![p / l as f64; l];
            prop_assert!(predicted_smse(&csi, &sol.q, &noise).unwrap() <= predicted_smse(&csi, &equal, &noise).unwrap() + 1e-12);
            if se == 0.0 {
                prop_assert!((sol.q.iter().sum::<f64>() - p).abs() < 1e-9 * p);
            }
            let pre = mmse_precoder(&csi, &sol.q, &noise).unwrap();
            for i in 0..l {
                prop_assert!((crate::linalg::norm(&pre.u.column(i)) - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn smse_monotone_and_convex(seed in any::<u64>()) {
            let mut rng = SeedSequence::new(seed, "mono").stream(0, 0);
            let csi = random_csi(3, 2, &mut rng);
            let noise = NoiseModel::new(1.0, 0.1, 5.0).unwrap();
            let a = [1.0, 2.0];
            let b = [3.0, 0.5];
            let va = predicted_smse(&csi, &a, &noise).unwrap();
            let vb = predicted_smse(&csi, &b, &noise).unwrap();
            let vm = predicted_smse(&csi, &[2.0, 1.25], &noise).unwrap();
            prop_assert!(vm <= 0.5 * (va + vb) + 1e-9);
            prop_assert!(predicted_smse(&csi, &[1.5, 2.0], &noise).unwrap() <= va + 1e-15);
        }
    }
}
