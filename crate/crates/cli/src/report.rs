//! Result files: `key = value` lines and named matrix blocks.
//!
//! ```text
//! command = tsvd
//! s = 0.0123
//!
//! [approximation 5 3]
//! 1.0<TAB>2.0<TAB>3.0
//! ...
//! ```
//!
//! Numbers are written in shortest round-trip form, so parsing a file
//! reproduces every value exactly.

use std::fmt::Write as _;

use tsvd_core::Matrix;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultFile {
    pub scalars: Vec<(String, String)>,
    pub matrices: Vec<(String, Matrix)>,
}

impl ResultFile {
    pub fn new() -> ResultFile {
        ResultFile::default()
    }

    pub fn scalar(&mut self, key: &str, value: impl ToString) -> &mut ResultFile {
        self.scalars.push((key.to_string(), value.to_string()));
        self
    }

    pub fn matrix(&mut self, name: &str, m: &Matrix) -> &mut ResultFile {
        self.matrices.push((name.to_string(), m.clone()));
        self
    }

    pub fn vector(&mut self, name: &str, v: &[f64]) -> &mut ResultFile {
        let m = Matrix::new(1, v.len(), v.to_vec()).expect("finite vector");
        self.matrix(name, &m)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.scalars.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn get_matrix(&self, name: &str) -> Option<&Matrix> {
        self.matrices.iter().find(|(k, _)| k == name).map(|(_, m)| m)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.scalars {
            let _ = writeln!(out, "{k} = {v}");
        }
        for (name, m) in &self.matrices {
            let _ = writeln!(out, "\n[{name} {} {}]", m.rows(), m.cols());
            out.push_str(&tsv(m));
        }
        out
    }

    pub fn parse(text: &str) -> Result<ResultFile, String> {
        let mut file = ResultFile::new();
        let mut lines = text.lines().enumerate().peekable();
        while let Some((no, line)) = lines.next() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let parts: Vec<&str> = header.split_whitespace().collect();
                let [name, rows, cols] = parts[..] else {
                    return Err(format!("line {}: malformed block header", no + 1));
                };
                let rows: usize = rows.parse().map_err(|_| format!("line {}: bad row count", no + 1))?;
                let cols: usize = cols.parse().map_err(|_| format!("line {}: bad column count", no + 1))?;
                let mut data = Vec::with_capacity(rows * cols);
                for _ in 0..rows {
                    let (no, row) = lines.next().ok_or("truncated matrix block")?;
                    for token in row.split('\t') {
                        data.push(token.trim().parse::<f64>().map_err(|_| format!("line {}: bad number {token:?}", no + 1))?);
                    }
                }
                let m = Matrix::new(rows, cols, data).map_err(|e| e.to_string())?;
                file.matrices.push((name.to_string(), m));
            } else if let Some((k, v)) = line.split_once(" = ") {
                file.scalars.push((k.trim().to_string(), v.trim().to_string()));
            } else {
                return Err(format!("line {}: expected `key = value`", no + 1));
            }
        }
        Ok(file)
    }
}

/// Rows as tab-separated lines.
pub fn tsv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(f64::to_string).collect();
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

/// Rows as tab-separated lines with a fixed number of decimals.
pub fn tsv_fixed(m: &Matrix, decimals: usize) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.decimals$}")).collect();
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}
