//! CSV ingestion and column standardization.

use std::path::Path;

use thiserror::Error;
use tsvd_core::Matrix;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: cannot parse {token:?} as a number")]
    Parse { line: usize, column: usize, token: String },
    #[error("line {line} has {found} fields, expected {expected}")]
    RaggedRows { line: usize, expected: usize, found: usize },
    #[error("no numeric rows")]
    Empty,
    #[error("column {0} has zero variance")]
    ZeroVarianceColumn(usize),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub column_names: Option<Vec<String>>,
    pub matrix: Matrix,
    pub standardized: bool,
    pub column_means: Option<Vec<f64>>,
    pub column_sds: Option<Vec<f64>>,
}

impl Dataset {
    pub fn from_matrix(matrix: Matrix) -> Dataset {
        Dataset {
            column_names: None,
            matrix,
            standardized: false,
            column_means: None,
            column_sds: None,
        }
    }
}

/// Semicolons win when the first non-empty line contains one.
fn detect_delimiter(text: &str) -> u8 {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.contains(';') {
        b';'
    } else {
        b','
    }
}

/// Parses CSV text into a dataset. Line and column numbers in errors are
/// 1-based and count the header line.
pub fn parse_csv(text: &str, has_header: bool) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(text))
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut names = None;
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if has_header && names.is_none() {
            names = Some(record.iter().map(str::to_string).collect::<Vec<_>>());
            width = Some(record.len());
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(DataError::RaggedRows {
                line,
                expected,
                found: record.len(),
            });
        }
        for (j, token) in record.iter().enumerate() {
            let v: f64 = token.parse().map_err(|_| DataError::Parse {
                line,
                column: j + 1,
                token: token.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::Parse {
                    line,
                    column: j + 1,
                    token: token.to_string(),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(DataError::Empty);
    }
    let matrix = Matrix::new(rows, cols, values).expect("validated rectangular finite data");
    Ok(Dataset {
        column_names: names,
        ..Dataset::from_matrix(matrix)
    })
}

pub fn load_csv(path: &Path, has_header: bool) -> Result<Dataset, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_csv(&text, has_header)
}

/// Centers each column and scales it to unit variance. The divisor is `m`,
/// or `m - 1` with `ddof1`.
pub fn standardize(ds: &Dataset, ddof1: bool) -> Result<Dataset, DataError> {
    let (m, n) = ds.matrix.shape();
    let divisor = if ddof1 { m as f64 - 1.0 } else { m as f64 };
    let mut means = Vec::with_capacity(n);
    let mut sds = Vec::with_capacity(n);
    for j in 0..n {
        let col = ds.matrix.column(j);
        let mean = col.iter().sum::<f64>() / m as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / divisor;
        if !(var > 0.0) || !var.is_finite() {
            return Err(DataError::ZeroVarianceColumn(j + 1));
        }
        means.push(mean);
        sds.push(var.sqrt());
    }
    let matrix = Matrix::from_fn(m, n, |i, j| (ds.matrix[(i, j)] - means[j]) / sds[j]);
    Ok(Dataset {
        column_names: ds.column_names.clone(),
        matrix,
        standardized: true,
        column_means: Some(means),
        column_sds: Some(sds),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_and_semicolon_csv() {
        let ds = parse_csv("1,2\n3,4\n", false).unwrap();
        assert_eq!(ds.matrix, Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
        let ds = parse_csv("1;2.5\n3;-4\n", false).unwrap();
        assert_eq!(ds.matrix[(1, 1)], -4.0);
    }

    #[test]
    fn reads_header() {
        let ds = parse_csv("a,b\n1,2", true).unwrap();
        assert_eq!(ds.column_names, Some(vec!["a".to_string(), "b".to_string()]));
        assert_eq!(ds.matrix.shape(), (1, 2));
    }

    #[test]
    fn reports_bad_token_position() {
        match parse_csv("1,x", false) {
            Err(DataError::Parse { line, column, token }) => {
                assert_eq!((line, column, token.as_str()), (1, 2, "x"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(matches!(
            parse_csv("1,2\n3\n", false),
            Err(DataError::RaggedRows { line: 2, expected: 2, found: 1 })
        ));
    }

    #[test]
    fn standardizes_with_divisor_m() {
        let ds = Dataset::from_matrix(Matrix::from_rows(&[[0.0, 1.0], [2.0, 5.0]]).unwrap());
        let st = standardize(&ds, false).unwrap();
        assert_eq!(st.matrix.column(0), vec![-1.0, 1.0]);
        assert_eq!(st.column_means, Some(vec![1.0, 3.0]));
    }

    #[test]
    fn constant_column_is_rejected() {
        let ds = Dataset::from_matrix(Matrix::from_rows(&[[1.0, 3.0], [2.0, 3.0]]).unwrap());
        assert!(matches!(standardize(&ds, false), Err(DataError::ZeroVarianceColumn(2))));
    }
}
