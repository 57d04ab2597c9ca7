use proptest::prelude::*;
use tsvd_cli::dataset::{parse_csv, standardize, Dataset};
use tsvd_cli::report::ResultFile;
use tsvd_core::Matrix;

fn matrix() -> impl Strategy<Value = Matrix> {
    (2usize..8, 1usize..5).prop_flat_map(|(r, c)| {
        prop::collection::vec(-1e6..1e6f64, r * c).prop_map(move |v| Matrix::new(r, c, v).unwrap())
    })
}

proptest! {
    #[test]
    fn result_files_round_trip(m in matrix(), s in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let mut file = ResultFile::new();
        file.scalar("s", s).matrix("x", &m);
        let back = ResultFile::parse(&file.render()).unwrap();
        let got = back.get_matrix("x").unwrap();
        prop_assert!(got.sub(&m).max_abs() <= 1e-12 * (1.0 + m.max_abs()));
        prop_assert_eq!(back.get("s").unwrap().parse::<f64>().unwrap(), s);
    }

    #[test]
    fn standardize_is_idempotent(m in matrix()) {
        let ds = Dataset::from_matrix(m);
        prop_assume!(standardize(&ds, false).is_ok());
        let once = standardize(&ds, false).unwrap();
        let twice = standardize(&once, false).unwrap();
        prop_assert!(twice.matrix.sub(&once.matrix).max_abs() < 1e-10);
        let rows = once.matrix.rows() as f64;
        for j in 0..once.matrix.cols() {
            let col = once.matrix.column(j);
            let mean = col.iter().sum::<f64>() / rows;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows;
            prop_assert!(mean.abs() < 1e-10 && (var - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn csv_text_round_trips(m in matrix(), semicolon in any::<bool>()) {
        let sep = if semicolon { ";" } else { "," };
        let text: String = (0..m.rows())
            .map(|i| m.row(i).iter().map(f64::to_string).collect::<Vec<_>>().join(sep) + "\n")
            .collect();
        prop_assert_eq!(parse_csv(&text, false).unwrap().matrix, m);
    }
}
