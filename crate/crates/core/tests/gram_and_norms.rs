use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sigma_ridge::bases::{design_matrix, BasisSpec};
use sigma_ridge::metrics::{diagnostics_from_gram, empirical_sq_norm, gram_diagnostics, gram_matrix, sup_sq_sum};
use sigma_ridge::sde::{builtin_model, simulate_sample, DiffusionPath, ModelId, PathSample, DEFAULT_SUBSTEPS};

fn sample(model: ModelId, num_paths: usize, n: usize, seed: u64) -> PathSample {
    simulate_sample(&builtin_model(model), num_paths, n, DEFAULT_SUBSTEPS, seed).unwrap()
}

fn specs() -> Vec<BasisSpec> {
    vec![
        BasisSpec::bspline(-1.0, 1.0, 4, 3).unwrap(),
        BasisSpec::bspline(-2.0, 2.0, 16, 2).unwrap(),
        BasisSpec::fourier(-1.5, 1.5, 9).unwrap(),
        BasisSpec::hermite(12).unwrap(),
    ]
}

#[test]
fn gram_equals_scaled_cross_product() {
    let s = sample(ModelId::M3, 30, 40, 1);
    for spec in specs() {
        let f = design_matrix(&spec, &s);
        let expected = f.transpose() * &f / (s.len() * s.n()) as f64;
        let gram = gram_matrix(&spec, &s);
        assert!((&gram - expected).abs().max() < 1e-12);
        assert_eq!((&gram - gram.transpose()).abs().max(), 0.0);
    }
}

#[test]
fn norm_of_span_element_is_quadratic_form() {
    let s = sample(ModelId::M2, 25, 60, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for spec in specs() {
        let gram = gram_matrix(&spec, &s);
        for _ in 0..20 {
            let a = DVector::from_fn(spec.dim(), |_, _| rng.random_range(-3.0..3.0));
            let h = |x: f64| DVector::from_vec(spec.eval(x)).dot(&a);
            let direct = empirical_sq_norm(h, &s);
            let quad = (a.transpose() * &gram * &a)[0];
            assert!((direct - quad).abs() <= 1e-10 * direct.abs().max(1e-300), "{direct} vs {quad}");
        }
    }
}

#[test]
fn empirical_norm_examples() {
    let s = sample(ModelId::M1, 5, 20, 3);
    assert_eq!(empirical_sq_norm(|_| 0.0, &s), 0.0);
    assert!((empirical_sq_norm(|_| 1.5, &s) - 2.25).abs() < 1e-14);
    // h(x) = x: mean of squared stored values, k = 0..n−1
    let mut sum = 0.0;
    for p in s.paths() {
        for &x in &p.values()[..s.n()] {
            sum += x * x;
        }
    }
    let direct = sum / (s.len() * s.n()) as f64;
    assert!((empirical_sq_norm(|x| x, &s) - direct).abs() < 1e-14);
}

#[test]
fn single_point_gram_is_rank_one() {
    let p = DiffusionPath::new(vec![0.3, 0.1]).unwrap();
    let s = PathSample::new(vec![p], 0).unwrap();
    let spec = BasisSpec::bspline(-1.0, 1.0, 2, 3).unwrap();
    let phi = DVector::from_vec(spec.eval(0.3));
    assert!((gram_matrix(&spec, &s) - &phi * phi.transpose()).abs().max() < 1e-15);
}

#[test]
fn spline_sup_of_squares_at_most_one() {
    for degree in 1..=5 {
        for k in [1, 2, 4, 8, 16, 32] {
            let spec = BasisSpec::bspline(-3.0, 2.0, k, degree).unwrap();
            let l = sup_sq_sum(&spec);
            assert!(l <= 1.0 + 1e-12 && l > 0.0, "K = {k}, M = {degree}: L(m) = {l}");
        }
    }
}

#[test]
fn identity_gram_has_unit_inverse_norm() {
    let d = diagnostics_from_gram(&DMatrix::identity(5, 5), 1.0, 100);
    assert_eq!(d.op_norm_inverse, 1.0);
    assert!(!d.singular);
    let d = diagnostics_from_gram(&DMatrix::zeros(3, 3), 1.0, 100);
    assert!(d.singular && d.op_norm_inverse.is_infinite() && !d.satisfied);
}

#[test]
fn condition_flips_as_the_interval_grows() {
    let s = sample(ModelId::M1, 10_000, 10, 5);
    let widths: Vec<f64> = (1..=40).map(|i| 0.25 * i as f64).collect();
    let flags: Vec<bool> = widths
        .iter()
        .map(|&a| gram_diagnostics(&BasisSpec::bspline(-a, a, 2, 1).unwrap(), &s).satisfied)
        .collect();
    let first_bad = flags.iter().position(|&ok| !ok).expect("violated for some A_N");
    assert!(flags[..first_bad].iter().any(|&ok| ok), "never satisfied: {flags:?}");
    assert!(flags[first_bad..].iter().all(|&ok| !ok), "flips back: {flags:?}");
    let a = widths[first_bad];
    assert!(a > 0.5 && a < 10.0, "first violation at A_N = {a}");
    eprintln!("condition first violated at A_N = {a} (√log N = {:.2})", 10_000f64.ln().sqrt());
}
