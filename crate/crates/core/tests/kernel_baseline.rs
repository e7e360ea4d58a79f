use proptest::prelude::*;
use sigma_ridge::baseline::{nw_estimate, scott_bandwidth, Bandwidth, Kernel, KernelSpec, NwMode};
use sigma_ridge::sde::DiffusionPath;

fn standardized(values: Vec<f64>) -> DiffusionPath {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    DiffusionPath::new(values.iter().map(|v| (v - mean) / sd).collect()).unwrap()
}

#[test]
fn scott_rule_scaling() {
    let wave = |n: usize| standardized((0..=n).map(|k| (k as f64 * 0.37).sin() + 0.01 * k as f64).collect());
    let h1 = scott_bandwidth(&wave(100)).unwrap();
    let h16 = scott_bandwidth(&wave(1600)).unwrap();
    assert!((h1 - 100f64.powf(-0.2)).abs() < 1e-12);
    assert!((h16 / h1 - 16f64.powf(-0.2)).abs() < 1e-12);
}

#[test]
fn weights_enter_only_through_their_ratio() {
    let values = vec![0.0, 0.3, -0.1, 0.2, 0.25, -0.4];
    let p = DiffusionPath::new(values.clone()).unwrap();
    let n = values.len() - 1;
    let h = 0.3;
    let spec = KernelSpec {
        kernel: Kernel::Gaussian,
        bandwidth: Bandwidth::Fixed(h),
    };
    for x in [-0.3, 0.0, 0.1, 0.5] {
        // any constant factor on the weights cancels
        let w = |y: f64| 7.3 * (-0.5 * ((y - x) / h).powi(2)).exp();
        let num: f64 = (1..n).map(|k| w(values[k]) * (values[k + 1] - values[k]).powi(2) / n as f64).sum();
        let den: f64 = (1..=n).map(|k| w(values[k])).sum();
        let got = nw_estimate(&p, x, &spec, NwMode::Literal).unwrap().value;
        assert!((got - num / den).abs() < 1e-14);
    }
}

#[test]
fn far_points_underflow() {
    let p = DiffusionPath::new(vec![0.0, 0.4, -0.3, 0.1, 0.6]).unwrap();
    let spec = KernelSpec::default();
    let h = scott_bandwidth(&p).unwrap();
    for x in [0.6 + 40.0 * h, -0.3 - 40.0 * h] {
        for mode in [NwMode::Literal, NwMode::Corrected] {
            let v = nw_estimate(&p, x, &spec, mode).unwrap();
            assert!(v.underflow && v.value == 0.0);
        }
    }
}

proptest! {
    #[test]
    fn estimates_are_nonnegative(
        steps in prop::collection::vec(-1.0f64..1.0, 2..60),
        x in -3.0f64..3.0,
        h in 0.05f64..2.0,
    ) {
        let mut values = vec![0.0];
        for s in steps {
            let last = *values.last().unwrap();
            values.push(last + s);
        }
        let p = DiffusionPath::new(values).unwrap();
        let spec = KernelSpec { kernel: Kernel::Gaussian, bandwidth: Bandwidth::Fixed(h) };
        for mode in [NwMode::Literal, NwMode::Corrected] {
            let v = nw_estimate(&p, x, &spec, mode).unwrap();
            prop_assert!(v.value >= 0.0 && v.value.is_finite());
        }
    }
}
