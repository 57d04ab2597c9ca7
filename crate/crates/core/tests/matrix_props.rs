use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tsvd_core::matrix::{classical_svd, orthonormalize, Matrix};

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-10.0..10.0f64, rows * cols).prop_map(move |v| Matrix::new(rows, cols, v).unwrap())
}

fn integer_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-9i32..=9, rows * cols)
        .prop_map(move |v| Matrix::new(rows, cols, v.into_iter().map(f64::from).collect()).unwrap())
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn orthonormalize_is_idempotent(m in matrix(6, 3)) {
        let once = orthonormalize(&m).unwrap();
        let twice = orthonormalize(&once).unwrap();
        prop_assert!(twice.sub(&once).max_abs() < 1e-12);
    }

    #[test]
    fn singular_values_ignore_permutations(m in matrix(5, 4), rows in permutation(5), cols in permutation(4)) {
        let base = classical_svd(&m).unwrap();
        let permuted = classical_svd(&m.permuted(&rows, &cols)).unwrap();
        let top = base.values()[0].max(1e-300);
        for (a, b) in base.values().iter().zip(permuted.values()) {
            prop_assert!((a - b).abs() <= 1e-10 * top);
        }
    }

    #[test]
    fn svd_reconstructs(m in matrix(4, 6)) {
        let svd = classical_svd(&m).unwrap();
        prop_assert!(svd.reconstruct().sub(&m).max_abs() < 1e-10 * (1.0 + m.max_abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn rank_one_truncation_beats_random_search(m in integer_matrix(4, 3), seed in any::<u64>()) {
        let truncated = m.sub(&classical_svd(&m).unwrap().reconstruct_rank(1)).frobenius_norm();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = f64::INFINITY;
        for _ in 0..10_000 {
            // Best rank-one fit along a random direction `v`: u = M v / |v|^2.
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let vv: f64 = v.iter().map(|x| x * x).sum();
            let candidate = Matrix::from_fn(4, 3, |i, j| {
                let u_i: f64 = (0..3).map(|k| m[(i, k)] * v[k]).sum::<f64>() / vv;
                u_i * v[j]
            });
            best = best.min(m.sub(&candidate).frobenius_norm());
        }
        prop_assert!(truncated <= best + 1e-9);
    }
}
