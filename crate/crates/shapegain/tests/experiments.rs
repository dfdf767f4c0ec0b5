use shapegain::experiments::{self, CsiMode};
use shapegain::ExperimentSpec;

const CONFIG: &str = r#"
M = 2
K = 2
N_k = 2
L_k = 1
B = 12
B_s_list = [8, 9, 10, 12]
B_g_list = [3, 4, 5]
snr_db_list = [0, 15, 30]
trials = 3000
master_seed = 4
modulation = "16QAM"
sigma2 = 1.0
training_samples = 20000
sigmaE2_source = "analytic"
queries = 2000
ccdf_B_s = 7
ccdf_b_max = 0.5
ccdf_points = 41
"#;

fn spec() -> ExperimentSpec {
    ExperimentSpec::from_toml_str(CONFIG).unwrap()
}

fn with_threads<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(f)
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let s = spec();
    let a = with_threads(1, || experiments::link_sweep(&s, CsiMode::Quantized).unwrap());
    let b = with_threads(3, || experiments::link_sweep(&s, CsiMode::Quantized).unwrap());
    assert_eq!(a, b);
    let a = with_threads(1, || experiments::bitalloc_sweep(&s).unwrap());
    let b = with_threads(4, || experiments::bitalloc_sweep(&s).unwrap());
    assert_eq!(a, b);
}

#[test]
fn ccdf_columns_are_valid() {
    let curve = experiments::ccdf_compare(&spec()).unwrap();
    assert_eq!(curve.points.len(), 41);
    let cols: [fn(&experiments::ccdf::CcdfPoint) -> f64; 5] =
        [|p| p.monte_carlo, |p| p.exact, |p| p.approx, |p| p.approx_sin, |p| p.approx_psi];
    for col in cols {
        assert_eq!(col(&curve.points[0]), 1.0);
        assert!(curve.points.iter().all(|p| (0.0..=1.0).contains(&col(p))));
        assert!(curve.points.windows(2).all(|w| col(&w[1]) <= col(&w[0])));
    }
}

#[test]
fn bitalloc_sweep_is_consistent() {
    let sweep = experiments::bitalloc_sweep(&spec()).unwrap();
    for p in &sweep.points {
        assert_eq!(p.shape_bits + p.gain_bits, 12);
        assert!(p.empirical > 0.0 && p.std_error > 0.0);
        // shape and gain errors are the two legs of |z - z_hat|^2
        assert!((p.gain_part + p.shape_part - p.empirical).abs() < 0.2 * p.empirical);
    }
    let table = sweep.table().unwrap();
    assert_eq!(table.values("B_s").unwrap(), vec![8.0, 9.0, 10.0, 12.0]);
}

#[test]
fn link_points_stay_inside_the_budget() {
    let sweep = experiments::link_sweep(&spec(), CsiMode::Quantized).unwrap();
    for p in &sweep.points {
        assert!(p.max_power_ratio <= 1.0 + 1e-12);
        assert!(p.ber >= 0.0 && p.ber <= 1.0 && p.bit_errors <= p.bits);
        assert!(p.smse > 0.0);
    }
    // more SNR never hurts on average
    for bs in [8, 12] {
        let lo = sweep.point(Some(bs), 0.0).unwrap();
        let hi = sweep.point(Some(bs), 30.0).unwrap();
        assert!(hi.smse < lo.smse);
    }
}

#[test]
fn analytic_and_fitted_allocations_are_reported() {
    let mut s = spec();
    s.shape_bits = vec![6, 7, 8, 9, 10];
    let r = experiments::allocate(&s).unwrap();
    for row in [&r.analytic, &r.fitted] {
        assert!((row.real_shape_bits + row.real_gain_bits - 12.0).abs() < 1e-12);
        assert_eq!(row.integer_shape_bits + row.integer_gain_bits, 12);
        assert!((row.integer_shape_bits as f64 - row.real_shape_bits).abs() <= 1.0);
    }
    assert_eq!(r.asymptotic, (9.0, 3.0));
    assert_eq!(r.table().unwrap().rows().len(), 2);
}
