mod common;

use common::gauss_hermite;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sigma_ridge::bases::{make_knots, BasisSpec, FourierScaling};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn splines_sum_to_one(
        a in -5.0f64..5.0,
        width in 0.01f64..20.0,
        segments in 1usize..=32,
        degree in 1usize..=6,
        t in 0.0f64..=1.0,
    ) {
        let b = a + width;
        let spec = BasisSpec::bspline(a, b, segments, degree).unwrap();
        let x = (a + t * width).min(b);
        let v = spec.eval(x);
        let sum: f64 = v.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-12, "sum {} at x = {}", sum, x);
        prop_assert!(v.iter().all(|&e| e >= 0.0));
    }

    #[test]
    fn splines_are_local(
        segments in 1usize..=16,
        degree in 1usize..=6,
        t in 0.0f64..=1.0,
    ) {
        let (a, b) = (-2.0, 3.0);
        let spec = BasisSpec::bspline(a, b, segments, degree).unwrap();
        let knots = spec.knots().unwrap();
        let x = a + t * (b - a);
        let v = spec.eval(x);
        let nonzero = v.iter().filter(|&&e| e != 0.0).count();
        prop_assert!(nonzero <= degree + 1);
        let m = degree as isize;
        for (l, &e) in v.iter().enumerate() {
            let l = l as isize;
            // basis index l is B_{l−M}, supported on [u_{l−M}, u_{l+1}]
            if x < knots.get(l - m) || x > knots.get(l + 1) {
                prop_assert_eq!(e, 0.0);
            }
        }
    }
}

#[test]
fn splines_vanish_outside_the_interval() {
    let spec = BasisSpec::bspline(-1.0, 1.0, 4, 3).unwrap();
    for x in [-1.0000001, 1.0000001, -7.0, 42.0] {
        assert!(spec.eval(x).iter().all(|&v| v == 0.0));
    }
}

#[test]
fn knot_examples() {
    let u = make_knots(-1.0, 1.0, 2, 3).unwrap();
    assert_eq!(u.as_slice(), &[-1.0, -1.0, -1.0, -1.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
    assert_eq!(make_knots(-1.0, 1.0, 1, 1).unwrap().as_slice(), &[-1.0, -1.0, 1.0, 1.0]);
    let u = make_knots(0.0, 4.0, 4, 2).unwrap();
    assert_eq!((u.get(1), u.get(2), u.get(3)), (1.0, 2.0, 3.0));
    assert!(make_knots(1.0, 1.0, 2, 3).is_err());
}

#[test]
fn fourier_orthonormal_by_quadrature() {
    // the midpoint rule with 256 nodes is exact for trigonometric polynomials
    // of degree below 256 on one period
    let nodes = 256;
    for (a, b, m) in [(0.0, 1.0, 3), (-1.0, 1.0, 15), (-2.5, 4.0, 31)] {
        let spec = BasisSpec::fourier(a, b, m).unwrap();
        let h = (b - a) / nodes as f64;
        let mut gram = DMatrix::<f64>::zeros(m, m);
        for i in 0..nodes {
            let x = a + (i as f64 + 0.5) * h;
            let v = DVector::from_vec(spec.eval(x));
            gram += &v * v.transpose() * h;
        }
        let dev = (gram - DMatrix::identity(m, m)).abs().max();
        assert!(dev < 1e-8, "[{a},{b}] m = {m}: deviation {dev}");
    }
}

#[test]
fn fourier_literal_scaling_is_not_orthonormal() {
    let spec = BasisSpec::fourier(0.0, 2.0, 3).unwrap().with_fourier_scaling(FourierScaling::Literal);
    let v = spec.eval(0.0);
    assert!((v[0] - 0.5).abs() < 1e-15);
    assert!((v[1] - 0.5 * 2f64.sqrt()).abs() < 1e-15);
    let ortho = BasisSpec::fourier(0.0, 1.0, 3).unwrap().eval(0.0);
    assert!((ortho[0] - 1.0).abs() < 1e-15 && (ortho[1] - 2f64.sqrt()).abs() < 1e-15 && ortho[2].abs() < 1e-15);
}

#[test]
fn hermite_orthonormal_by_gauss_quadrature() {
    let (nodes, weights) = gauss_hermite(128);
    // ∫ e^{-x²} dx = √π as a check of the rule itself
    let total: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * (-x * x).exp()).sum();
    assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-10);

    let m = 20;
    let spec = BasisSpec::hermite(m).unwrap();
    let mut gram = DMatrix::<f64>::zeros(m, m);
    for (x, w) in nodes.iter().zip(&weights) {
        let v = DVector::from_vec(spec.eval(*x));
        gram += &v * v.transpose() * *w;
    }
    let dev = (gram - DMatrix::identity(m, m)).abs().max();
    assert!(dev < 1e-8, "deviation {dev}");
}

#[test]
fn hermite_first_value() {
    let v = BasisSpec::hermite(1).unwrap().eval(0.0);
    assert!((v[0] - 0.751_125_544_464_942_5).abs() < 1e-15);
}

#[test]
fn hermite_tails_decay() {
    // past the turning point |h_j| falls like e^{-x²/2}; below 1e-10 once
    // x² ≥ 3(4j + 3) + 2·ln(1e10)
    let m = 20;
    let spec = BasisSpec::hermite(m).unwrap();
    let slack = 2.0 * 1e10f64.ln();
    for j in 0..m {
        let start = (3.0 * (4 * j + 3) as f64 + slack).sqrt();
        for step in 0..50 {
            let x = start + 0.25 * step as f64;
            for s in [x, -x] {
                let v = spec.eval(s)[j];
                assert!(v.abs() < 1e-10, "h_{j}({s}) = {v}");
            }
        }
    }
}

#[test]
fn spline_spaces_are_nested() {
    let (a, b) = (-1.0, 1.0);
    let xs: Vec<f64> = (0..=400).map(|i| a + (b - a) * i as f64 / 400.0).collect();
    for degree in 1..=4 {
        for k in [1, 2, 4, 8, 16] {
            let coarse = BasisSpec::bspline(a, b, k, degree).unwrap();
            let fine = BasisSpec::bspline(a, b, 2 * k, degree).unwrap();
            let f = DMatrix::from_fn(xs.len(), fine.dim(), |r, c| fine.eval(xs[r])[c]);
            let svd = f.clone().svd(true, true);
            for l in 0..coarse.dim() {
                let target = DVector::from_iterator(xs.len(), xs.iter().map(|&x| coarse.eval(x)[l]));
                let coef = svd.solve(&target, 1e-14).unwrap();
                let resid = (&f * coef - &target).amax();
                assert!(resid < 1e-10, "K = {k}, M = {degree}, ℓ = {l}: residual {resid}");
            }
        }
    }
}
