use proptest::prelude::*;
use tsvd_core::matrix::{classical_svd, Matrix};
use tsvd_core::tsvd::{
    baseline_alternating_svd, baseline_alternating_svd_traced, column_fit_weights, cycle, estimate_a_step, estimate_b_step, initial_state, solve_stage,
    total_svd, StepOptions, TsvdConfig,
};
use tsvd_core::weights::{calibrate, CalibrationTarget, Power, WeightSpec};

fn example() -> Matrix {
    let base = [[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [3.0, 6.0, 9.0], [4.0, 8.0, 12.0], [5.0, 10.0, 0.0]];
    let noise = [[-92.0, 3.0, -17.0], [48.0, 6.0, -8.0], [26.0, -4.0, -64.0], [8.0, -2.0, 92.0], [17.0, -3.0, 0.0]];
    Matrix::from_fn(5, 3, |i, j| base[i][j] + 0.001 * noise[i][j])
}

fn robust(k3: f64) -> WeightSpec {
    calibrate(CalibrationTarget::K3(k3), Power::Four).unwrap()
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-5.0..5.0f64, rows * cols).prop_map(move |v| Matrix::new(rows, cols, v).unwrap())
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn baseline_residual_is_monotone(x in matrix(6, 4), seed in any::<u64>()) {
        let (_, _, trace) = baseline_alternating_svd_traced(&x, 2, 1e-12, seed).unwrap();
        for w in trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn baseline_reaches_truncated_svd(x in matrix(6, 4), seed in any::<u64>()) {
        let (a, b, _) = baseline_alternating_svd_traced(&x, 2, 1e-13, seed).unwrap();
        let got = x.sub(&a.matmul_transpose(&b)).frobenius_norm();
        let want = x.sub(&classical_svd(&x).unwrap().reconstruct_rank(2)).frobenius_norm();
        // Close singular values slow the alternation down; skip near-ties.
        let s = classical_svd(&x).unwrap();
        prop_assume!(s.values()[1] - s.values()[2] > 0.05 * s.values()[0]);
        prop_assert!((got - want).abs() <= 1e-8 * want.max(1.0));
    }

    #[test]
    fn step_duality(x in matrix(4, 3), f in matrix(3, 2), w in prop::collection::vec(0.1..1.0f64, 12)) {
        // Solving A given B on X equals solving B given A on X'.
        let w = Matrix::new(4, 3, w).unwrap();
        let opts = StepOptions::ordinary();
        let a_step = estimate_a_step(&x, &f, &Matrix::zeros(3, 2), &w, &opts).unwrap();
        let b_step = estimate_b_step(&x.transpose(), &f, &Matrix::zeros(3, 2), &w.transpose(), &opts).unwrap();
        prop_assert!(a_step.unnormalized.sub(&b_step.unnormalized).max_abs() < 1e-12 * (1.0 + a_step.unnormalized.max_abs()));
    }

    #[test]
    fn permutation_equivariance(rows in permutation(5), cols in permutation(3), total in prop::bool::ANY) {
        let x = example();
        let cfg = TsvdConfig::new(1, robust(1.0)).total(total);
        let base = total_svd(&x, &cfg).unwrap();
        let moved = total_svd(&x.permuted(&rows, &cols), &cfg).unwrap();
        let tol = 1e3 * cfg.tol;
        prop_assert!(moved.approximation.sub(&base.approximation.permuted(&rows, &cols)).max_abs() < tol * 15.0);
        prop_assert!(moved.state.weights.sub(&base.state.weights.permuted(&rows, &cols)).max_abs() < tol);
        let ident = [0usize];
        let var_a = base.state.var_a.permuted(&rows, &ident);
        let var_b = base.state.var_b.permuted(&cols, &ident);
        prop_assert!(moved.state.var_a.sub(&var_a).max_abs() <= tol * (1.0 + var_a.max_abs()));
        prop_assert!(moved.state.var_b.sub(&var_b).max_abs() <= tol * (1.0 + var_b.max_abs()));
    }
}

#[test]
fn converged_state_is_a_fixed_point() {
    let x = example();
    for (spec, total) in [(robust(1.0), false), (robust(1.0), true), (WeightSpec::least_squares(), true)] {
        let cfg = TsvdConfig::new(1, spec).total(total);
        let res = total_svd(&x, &cfg).unwrap();
        let again = cycle(&x, &res.state, &cfg, if total { 1.0 } else { 0.0 }).unwrap();
        let change = again.approximation().sub(&res.approximation).max_abs() / res.approximation.max_abs();
        assert!(change < 10.0 * cfg.tol, "{change}");
        let a = &res.state.a;
        let raw = a.transpose().matmul(a);
        assert!(raw.sub(&Matrix::identity(1)).max_abs() < 1e-12);
    }
}

#[test]
fn zero_continuation_endpoint_is_the_ordinary_fit() {
    let x = example();
    let cfg = TsvdConfig::new(1, robust(1.0)).tol(1e-10);
    let ordinary = total_svd(&x, &cfg).unwrap();
    let total_cfg = cfg.clone().total(true);
    let stage = solve_stage(&x, &initial_state(&x, &total_cfg).unwrap(), &total_cfg, 0.0).unwrap();
    assert!(stage.converged);
    let gap = stage.state.approximation().sub(&ordinary.approximation).max_abs() / ordinary.approximation.max_abs();
    assert!(gap < 10.0 * cfg.tol);
}

#[test]
fn robust_weights_isolate_the_outlier_row() {
    let x = example();
    let (a, _) = baseline_alternating_svd(&x, 1, 1e-14, 42).unwrap();
    let w = column_fit_weights(&x, &a, &robust(1.5)).unwrap();
    for i in 0..4 {
        for j in 0..3 {
            assert!(w[(i, j)] > 0.9, "({i},{j}) = {}", w[(i, j)]);
        }
    }
    for j in 0..3 {
        assert!(w[(4, j)] < 0.05, "{}", w[(4, j)]);
    }
}

#[test]
fn step_matches_column_regressions() {
    use tsvd_core::regress::{robust_gls, RegressionProblem};
    let x = example();
    let a = Matrix::from_rows(&[[0.3, 0.1], [0.5, -0.2], [0.6, 0.4], [0.2, 0.9], [0.5, 0.0]]).unwrap();
    let step = estimate_b_step(&x, &a, &Matrix::zeros(5, 2), &Matrix::filled(5, 3, 1.0), &StepOptions::ordinary()).unwrap();
    for j in 0..3 {
        let prob = RegressionProblem::new(x.column(j), a.clone(), None).unwrap();
        let est = robust_gls(&prob, &WeightSpec::least_squares(), 1e-12, 10).unwrap();
        for k in 0..2 {
            assert!((step.factor[(j, k)] - est.beta[k]).abs() < 1e-10);
        }
    }
}
