use num_complex::Complex64;
use shapegain::codebook_io::{
    load_gain_codebook, load_shape_codebook, read_gain_codebook, read_shape_codebook, save_gain_codebook,
    save_shape_codebook, write_gain_codebook, write_shape_codebook,
};
use shapegain::experiments::{sample_gains, shape_codebook, train_gain};
use shapegain::ExperimentSpec;
use shapegain_core::gain::GainCodebook;
use shapegain_core::shape::ShapeCodebook;

const CONFIG: &str = r#"
M = 3
K = 1
N_k = 2
L_k = 1
B = 12
B_s_list = [8]
snr_db_list = [0]
trials = 10
master_seed = 99
modulation = "QPSK"
sigma2 = 1.0
training_samples = 20000
sigmaE2_source = "analytic"
"#;

fn bits_of(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn shape_bits(cb: &ShapeCodebook) -> Vec<u64> {
    cb.codewords().flatten().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect()
}

#[test]
fn trained_gain_codebook_round_trips_bit_exactly() {
    let spec = ExperimentSpec::from_toml_str(CONFIG).unwrap();
    let gains = sample_gains(&spec, spec.training_samples, "gain-training").unwrap();
    for bits in [0, 1, 4, 7] {
        let cb = train_gain(&gains, bits).unwrap();
        let mut buf = Vec::new();
        write_gain_codebook(&mut buf, &cb).unwrap();
        let back = read_gain_codebook(buf.as_slice()).unwrap();
        assert_eq!(back.bits(), bits);
        assert_eq!(bits_of(back.centroids()), bits_of(cb.centroids()));
    }
}

#[test]
fn shape_codebook_round_trips_bit_exactly() {
    let spec = ExperimentSpec::from_toml_str(CONFIG).unwrap();
    let cb = shape_codebook(&spec, 8).unwrap();
    let mut buf = Vec::new();
    write_shape_codebook(&mut buf, &cb).unwrap();
    let back = read_shape_codebook(buf.as_slice()).unwrap();
    assert_eq!((back.dimension(), back.bits(), back.seed()), (3, 8, 99));
    assert_eq!(shape_bits(&back), shape_bits(&cb));
}

#[test]
fn awkward_values_survive_files() {
    let dir = tempfile::tempdir().unwrap();
    let centroids = vec![f64::MIN_POSITIVE, 0.1 + 0.2, 1.0 / 3.0, 1e300];
    let gain = GainCodebook::new(centroids.clone(), 2).unwrap();
    let path = dir.path().join("nested/gain.txt");
    save_gain_codebook(&path, &gain).unwrap();
    assert_eq!(bits_of(load_gain_codebook(&path).unwrap().centroids()), bits_of(&centroids));

    let s = std::f64::consts::FRAC_1_SQRT_2;
    let vectors =
        vec![Complex64::new(s, 0.0), Complex64::new(0.0, -s), Complex64::new(-0.6, 0.0), Complex64::new(0.0, 0.8)];
    let shape = ShapeCodebook::from_vectors(2, 1, 5, vectors).unwrap();
    let path = dir.path().join("shape.txt");
    save_shape_codebook(&path, &shape).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("M 2 B_s 1 seed 5\n"));
    assert_eq!(shape_bits(&load_shape_codebook(&path).unwrap()), shape_bits(&shape));
}

#[test]
fn malformed_files_are_rejected() {
    let cases = ["", "B_g 1\n0.5\n", "B_g 1\n0.5\nabc\n", "B_g 1\n0.5 0.6\n0.7\n", "B_g x\n0.5\n"];
    for text in cases {
        assert!(read_gain_codebook(text.as_bytes()).is_err(), "{text:?}");
    }
    let cases = [
        "M 2 B_s 0\n1 0 0 0\n",
        "M 2 B_s 0 seed 1\n1 0 0\n",
        "M 2 B_s 0 seed 1\n2 0 0 0\n",
        "M 2 B_s 1 seed 1\n1 0 0 0\n",
    ];
    for text in cases {
        assert!(read_shape_codebook(text.as_bytes()).is_err(), "{text:?}");
    }
    let err = read_gain_codebook("B_g 1\n0.5\nabc\n".as_bytes()).unwrap_err();
    assert!(format!("{err:#}").contains("line 3"), "{err:#}");
}
