use proptest::prelude::*;
use tsvd_core::locscale::{contamination_offset, estimate, estimate_with, gaussian_quantile_sample, update, FixedPointOptions};
use tsvd_core::weights::{calibrate, CalibrationTarget, Power, WeightSpec};

const TOL: f64 = 1e-10;

fn sample() -> impl Strategy<Value = Vec<f64>> {
    (prop::collection::vec(-3.0..3.0f64, 8..40), prop::collection::vec(10.0..50.0f64, 0..4)).prop_map(|(mut body, outliers)| {
        body.extend(outliers);
        body
    })
}

fn spec() -> impl Strategy<Value = WeightSpec> {
    prop::sample::select(vec![0.75, 0.9, 0.95]).prop_map(|e| calibrate(CalibrationTarget::Efficacy(e), Power::Four).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn affine_equivariance(xs in sample(), spec in spec(), a in prop::sample::select(vec![-3.0, -0.5, 0.25, 2.0, 7.0]), b in -100.0..100.0f64) {
        let base = estimate(&xs, &spec, 1e-13, 2000).unwrap();
        let moved: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let est = estimate(&moved, &spec, 1e-13, 2000).unwrap();
        let scale = base.s_x * a.abs();
        prop_assert!((est.n - (a * base.n + b)).abs() <= 1e-9 * (scale + (a * base.n + b).abs()));
        prop_assert!((est.s_x - scale).abs() <= 1e-9 * scale);
    }

    #[test]
    fn fixed_point_residual(xs in sample(), spec in spec()) {
        let est = estimate(&xs, &spec, TOL, 2000).unwrap();
        let ones = vec![1.0; xs.len()];
        let (n1, s1) = update(&xs, &ones, &spec, est.n, est.s_x);
        prop_assert!((n1 - est.n).abs() < TOL * est.s_x);
        prop_assert!((s1 - est.s_x).abs() < TOL * est.s_x);
    }

    #[test]
    fn weights_are_valid(xs in sample(), spec in spec()) {
        let est = estimate(&xs, &spec, TOL, 2000).unwrap();
        for (x, w) in xs.iter().zip(&est.weights) {
            prop_assert!(*w > 0.0 && *w <= 1.0);
            if *x == est.n {
                prop_assert_eq!(*w, 1.0);
            }
            // Below |u| ~ 1e-4 the weight rounds to one.
            if (x - est.n).abs() > 1e-3 * est.s_x {
                prop_assert!(*w < 1.0);
            }
        }
        prop_assert!(est.n_eff >= 1.0 && est.n_eff <= xs.len() as f64 + 1e-9);
        let unbiased = est.n_eff / (est.n_eff - 1.0) * est.s_x * est.s_x;
        prop_assert!((est.sigma2_hat - unbiased).abs() <= 1e-12 * unbiased);
    }

    #[test]
    fn acceleration_is_sound(xs in sample(), spec in spec()) {
        let plain = FixedPointOptions { tol: TOL, max_iter: 20_000, accelerate: false };
        let fast = FixedPointOptions { accelerate: true, ..plain };
        let a = estimate_with(&xs, None, &spec, &plain).unwrap();
        let b = estimate_with(&xs, None, &spec, &fast).unwrap();
        prop_assert!((a.n - b.n).abs() < 10.0 * TOL * a.s_x / (1.0 - 0.95));
        prop_assert!((a.s_x - b.s_x).abs() < 10.0 * TOL * a.s_x / (1.0 - 0.95));
    }

    #[test]
    fn least_squares_collapse(xs in sample()) {
        let est = estimate(&xs, &WeightSpec::least_squares(), TOL, 100).unwrap();
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m).sqrt();
        prop_assert!((est.n - mean).abs() < 1e-12 * (1.0 + mean.abs()) * 10.0);
        prop_assert!((est.s_x - sd).abs() < 1e-12 * sd * 10.0);
    }
}

#[test]
fn contamination_offset_is_monotone() {
    let spec = calibrate(CalibrationTarget::Efficacy(0.9), Power::Four).unwrap();
    let clean = gaussian_quantile_sample(100);
    let offsets: Vec<f64> = (0..=120).map(|i| contamination_offset(&clean, 0.5 * f64::from(i), &spec)).collect();
    assert!(offsets.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{offsets:?}");
}
