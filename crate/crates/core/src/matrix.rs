//! Small dense real matrices.
//!
//! Storage is row-major and every entry is finite. The factorizations here
//! are tuned for the tiny ranks used by the estimators, not for throughput.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative residual norm below which a column counts as dependent.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Relative reconstruction accuracy promised by [`classical_svd`].
pub const RECONSTRUCTION_TOLERANCE: f64 = 1e-10;

/// Condition number above which a normal matrix is treated as singular.
pub const CONDITION_LIMIT: f64 = 1e12;

const MAX_JACOBI_SWEEPS: usize = 60;
const JACOBI_TOLERANCE: f64 = 1e-15;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument(format!(
                "matrix must have at least one row and column, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: k / cols,
                col: k % cols,
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Matrix> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Matrix::new(rows.len(), cols, data)
    }

    /// A column vector.
    pub fn column_vector(values: &[f64]) -> Result<Matrix> {
        Matrix::new(values.len(), 1, values.to_vec())
    }

    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        assert!(rows > 0 && cols > 0, "empty matrix");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Matrix {
        assert!(value.is_finite());
        let mut m = Matrix::zeros(rows, cols);
        m.data.fill(value);
        m
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix by evaluating `f(row, col)`.
    ///
    /// # Panics
    ///
    /// Panics if `f` returns a non-finite value.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let v = f(i, j);
                assert!(v.is_finite(), "non-finite entry at ({i}, {j})");
                m.data[i * cols + j] = v;
            }
        }
        m
    }

    /// Wraps entries produced by internal arithmetic, rejecting non-finite results.
    pub(crate) fn from_computed(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        Matrix::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows);
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn set_row(&mut self, i: usize, values: &[f64]) {
        assert_eq!(values.len(), self.cols);
        self.data[i * self.cols..(i + 1) * self.cols].copy_from_slice(values);
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Matrix product `self * rhs`.
    ///
    /// # Panics
    ///
    /// Panics on incompatible shapes.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.rows,
            "cannot multiply {}x{} by {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = rhs.row(k);
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (d, &b) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `self * rhs'`, the product used for low-rank reconstructions.
    pub fn matmul_transpose(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.cols);
        Matrix::from_fn(self.rows, rhs.rows, |i, j| dot(self.row(i), rhs.row(j)))
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape());
        self.zip_map(rhs, |a, b| a - b)
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape());
        self.zip_map(rhs, |a, b| a + b)
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        self.map(|v| v * factor)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_map(&self, rhs: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Columns `0..k` as a new matrix.
    pub fn leading_columns(&self, k: usize) -> Matrix {
        assert!(k >= 1 && k <= self.cols);
        Matrix::from_fn(self.rows, k, |i, j| self[(i, j)])
    }

    /// Copy with rows and columns reordered: `out[i][j] = self[rows[i]][cols[j]]`.
    pub fn permuted(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        assert_eq!(rows.len(), self.rows);
        assert_eq!(cols.len(), self.cols);
        Matrix::from_fn(self.rows, self.cols, |i, j| self[(rows[i], cols[j])])
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// A diagonal matrix stored as its diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalMatrix {
    diag: Vec<f64>,
}

impl DiagonalMatrix {
    pub fn new(diag: Vec<f64>) -> Result<DiagonalMatrix> {
        if let Some(k) = diag.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: k, col: k });
        }
        Ok(DiagonalMatrix { diag })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.diag.iter().all(|&v| v >= 0.0)
    }

    pub fn to_matrix(&self) -> Matrix {
        let n = self.diag.len();
        Matrix::from_fn(n, n, |i, j| if i == j { self.diag[i] } else { 0.0 })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Flips `v` so that its first clearly nonzero component is positive.
///
/// Returns whether a flip happened. Components below `1e-12` of the largest
/// magnitude are treated as zero so that rounding noise cannot pick the sign.
fn canonical_sign(v: &mut [f64]) -> bool {
    let peak = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let lead = v.iter().find(|x| x.abs() > RANK_TOLERANCE * peak);
    match lead {
        Some(&x) if x < 0.0 => {
            v.iter_mut().for_each(|x| *x = -*x);
            true
        }
        _ => false,
    }
}

/// Orthonormal basis for the column span of `m`, column by column.
///
/// Uses modified Gram-Schmidt with a second projection pass. Each output
/// column has its first nonzero component positive.
pub fn orthonormalize(m: &Matrix) -> Result<Matrix> {
    let (rows, cols) = m.shape();
    if rows < cols {
        return Err(Error::DimensionMismatch(format!(
            "cannot orthonormalize {cols} columns in dimension {rows}"
        )));
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols);
    for j in 0..cols {
        let original = m.column(j);
        let original_norm = norm(&original);
        let mut v = original;
        for _pass in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
            }
        }
        let residual = norm(&v);
        if original_norm == 0.0 || residual < RANK_TOLERANCE * original_norm {
            return Err(Error::RankDeficient { column: j });
        }
        v.iter_mut().for_each(|x| *x /= residual);
        canonical_sign(&mut v);
        basis.push(v);
    }
    let mut out = Matrix::zeros(rows, cols);
    for (j, q) in basis.iter().enumerate() {
        out.set_column(j, q);
    }
    Ok(out)
}

/// Thin singular value decomposition `M = U diag(s) V'`.
#[derive(Clone, Debug)]
pub struct Svd {
    /// `m x k` with orthonormal columns, `k = min(m, n)`.
    pub u: Matrix,
    /// Singular values in descending order.
    pub singular_values: DiagonalMatrix,
    /// `n x k` with orthonormal columns.
    pub v: Matrix,
}

impl Svd {
    pub fn values(&self) -> &[f64] {
        self.singular_values.diag()
    }

    pub fn reconstruct(&self) -> Matrix {
        self.reconstruct_rank(self.values().len())
    }

    /// Best rank-`k` approximation `U_k diag(s_k) V_k'`.
    pub fn reconstruct_rank(&self, k: usize) -> Matrix {
        let s = self.values();
        let us = Matrix::from_fn(self.u.rows(), k, |i, j| self.u[(i, j)] * s[j]);
        us.matmul_transpose(&self.v.leading_columns(k))
    }
}

/// Singular value decomposition by one-sided Jacobi rotations.
///
/// Columns of U that belong to zero singular values are completed to an
/// orthonormal set. Each column of U has its first nonzero component
/// positive, with V flipped to match.
pub fn classical_svd(m: &Matrix) -> Result<Svd> {
    if m.rows() < m.cols() {
        let t = classical_svd(&m.transpose())?;
        return Ok(canonicalize(t.v, t.singular_values.diag, t.u));
    }
    let (rows, cols) = m.shape();
    // Work on columns: g[j] is column j of the rotated matrix.
    let mut g: Vec<Vec<f64>> = (0..cols).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..cols).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let mut converged = cols < 2;
    for _sweep in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for j in 0..cols {
            for k in j + 1..cols {
                let alpha = dot(&g[j], &g[j]);
                let beta = dot(&g[k], &g[k]);
                let gamma = dot(&g[j], &g[k]);
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOLERANCE * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut g, j, k, c, s);
                rotate(&mut v, j, k, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            sweeps: MAX_JACOBI_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = g.iter().map(|c| norm(c)).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let scale = m.max_abs();
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut values = Vec::with_capacity(cols);
    let mut v_out = Matrix::zeros(cols, cols);
    for (slot, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        v_out.set_column(slot, &v[j]);
        if sigma > f64::EPSILON * scale * (rows.max(cols) as f64) {
            u_cols.push(g[j].iter().map(|x| x / sigma).collect());
            values.push(sigma);
        } else {
            u_cols.push(Vec::new());
            values.push(0.0);
        }
    }
    complete_basis(&mut u_cols, rows);
    let mut u = Matrix::zeros(rows, cols);
    for (j, c) in u_cols.iter().enumerate() {
        u.set_column(j, c);
    }
    Ok(canonicalize(u, values, v_out))
}

fn rotate(cols: &mut [Vec<f64>], j: usize, k: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(k);
    let (a, b) = (&mut left[j], &mut right[0]);
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xj, xk) = (*x, *y);
        *x = c * xj - s * xk;
        *y = s * xj + c * xk;
    }
}

/// Replaces empty entries of `cols` with unit vectors orthogonal to the rest.
fn complete_basis(cols: &mut [Vec<f64>], dim: usize) {
    for slot in 0..cols.len() {
        if !cols[slot].is_empty() {
            continue;
        }
        for e in 0..dim {
            let mut v: Vec<f64> = (0..dim).map(|i| if i == e { 1.0 } else { 0.0 }).collect();
            for _pass in 0..2 {
                for q in cols.iter().filter(|q| !q.is_empty()) {
                    let c = dot(q, &v);
                    v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
                }
            }
            let n = norm(&v);
            if n > 1e-8 {
                v.iter_mut().for_each(|x| *x /= n);
                cols[slot] = v;
                break;
            }
        }
    }
}

fn canonicalize(mut u: Matrix, values: Vec<f64>, mut v: Matrix) -> Svd {
    for j in 0..u.cols() {
        let mut col = u.column(j);
        if canonical_sign(&mut col) {
            u.set_column(j, &col);
            let flipped: Vec<f64> = v.column(j).iter().map(|x| -x).collect();
            v.set_column(j, &flipped);
        }
    }
    Svd {
        u,
        singular_values: DiagonalMatrix { diag: values },
        v,
    }
}

/// Inverse of a symmetric positive definite matrix via its eigen-decomposition.
///
/// On failure returns the condition estimate (infinite for singular input).
pub(crate) fn inverse_spd(a: &Matrix) -> std::result::Result<Matrix, f64> {
    let n = a.rows();
    debug_assert_eq!(n, a.cols());
    if n == 1 {
        let d = a[(0, 0)];
        return if d > 0.0 { Ok(Matrix::filled(1, 1, 1.0 / d)) } else { Err(f64::INFINITY) };
    }
    let svd = classical_svd(a).map_err(|_| f64::INFINITY)?;
    let s = svd.values();
    let (largest, smallest) = (s[0], s[n - 1]);
    if largest == 0.0 || smallest <= largest / CONDITION_LIMIT {
        let cond = if smallest > 0.0 { largest / smallest } else { f64::INFINITY };
        return Err(cond);
    }
    Ok(Matrix::from_fn(n, n, |i, j| {
        (0..n).map(|k| svd.v[(i, k)] * svd.u[(j, k)] / s[k]).sum()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_dev_from_identity(q: &Matrix) -> f64 {
        let g = q.transpose().matmul(q);
        g.sub(&Matrix::identity(g.rows())).max_abs()
    }

    #[test]
    fn rejects_non_finite_and_ragged_input() {
        assert!(matches!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
        assert!(Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(Matrix::new(0, 2, vec![]).is_err());
    }

    #[test]
    fn orthonormalize_keeps_orthonormal_block() {
        let m = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]).unwrap();
        assert_eq!(orthonormalize(&m).unwrap(), m);
    }

    #[test]
    fn orthonormalize_removes_column_scaling() {
        let m = Matrix::from_rows(&[[2.0, 0.0], [0.0, 3.0], [0.0, 0.0]]).unwrap();
        let expected = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]).unwrap();
        assert_eq!(orthonormalize(&m).unwrap(), expected);
    }

    #[test]
    fn orthonormalize_spans_input() {
        let m = Matrix::from_rows(&[
            [0.3, -1.2],
            [2.0, 0.7],
            [-0.4, 0.1],
            [1.1, 1.9],
            [0.5, -0.8],
        ])
        .unwrap();
        let q = orthonormalize(&m).unwrap();
        assert!(max_dev_from_identity(&q) < 1e-12);
        let projected = q.matmul(&q.transpose()).matmul(&m);
        assert!(projected.sub(&m).max_abs() < 1e-12);
    }

    #[test]
    fn orthonormalize_flags_dependent_columns() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        assert!(matches!(
            orthonormalize(&m),
            Err(Error::RankDeficient { column: 1 })
        ));
    }

    #[test]
    fn orthonormalize_applies_sign_convention() {
        let m = Matrix::from_rows(&[[-1.0], [1.0]]).unwrap();
        let q = orthonormalize(&m).unwrap();
        assert!(q[(0, 0)] > 0.0);
    }

    #[test]
    fn svd_of_diagonal() {
        let m = Matrix::from_rows(&[[3.0, 0.0], [0.0, 2.0]]).unwrap();
        let svd = classical_svd(&m).unwrap();
        assert_eq!(svd.values(), &[3.0, 2.0]);
    }

    #[test]
    fn svd_sorts_descending() {
        let m = Matrix::from_rows(&[[2.0, 0.0], [0.0, -3.0]]).unwrap();
        let svd = classical_svd(&m).unwrap();
        assert_eq!(svd.values(), &[3.0, 2.0]);
        assert!(svd.reconstruct().sub(&m).max_abs() < 1e-14);
    }

    #[test]
    fn svd_of_rank_one_outer_product() {
        // |u| = 2, |v| = 5
        let u = [2.0, 0.0, 0.0];
        let v = [3.0, 4.0];
        let m = Matrix::from_fn(3, 2, |i, j| u[i] * v[j]);
        let svd = classical_svd(&m).unwrap();
        assert!((svd.values()[0] - 10.0).abs() < 1e-12);
        assert!(svd.values()[1].abs() < 1e-12);
        assert!(max_dev_from_identity(&svd.u) < 1e-12);
        assert!(max_dev_from_identity(&svd.v) < 1e-12);
    }

    #[test]
    fn svd_of_wide_matrix() {
        let m = Matrix::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.5]]).unwrap();
        let svd = classical_svd(&m).unwrap();
        assert_eq!(svd.u.shape(), (2, 2));
        assert_eq!(svd.v.shape(), (3, 2));
        assert!(svd.reconstruct().sub(&m).max_abs() < 1e-12);
    }

    #[test]
    fn svd_matches_2x2_characteristic_polynomial() {
        let m = Matrix::from_rows(&[[4.0, 1.0], [-2.0, 3.0]]).unwrap();
        // Eigenvalues of M'M = [[20, -2], [-2, 10]]: 15 +- sqrt(29).
        let svd = classical_svd(&m).unwrap();
        let lam = [15.0 + 29f64.sqrt(), 15.0 - 29f64.sqrt()];
        for (s, l) in svd.values().iter().zip(lam) {
            assert!((s * s - l).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_of_zero_matrix_completes_bases() {
        let m = Matrix::zeros(3, 2);
        let svd = classical_svd(&m).unwrap();
        assert_eq!(svd.values(), &[0.0, 0.0]);
        assert!(max_dev_from_identity(&svd.u) < 1e-12);
    }

    #[test]
    fn spd_inverse_and_singular_detection() {
        let a = Matrix::from_rows(&[[4.0, 1.0], [1.0, 3.0]]).unwrap();
        let inv = inverse_spd(&a).unwrap();
        assert!(a.matmul(&inv).sub(&Matrix::identity(2)).max_abs() < 1e-14);
        let x = inverse_spd(&a).unwrap().mul_vec(&[1.0, 2.0]);
        assert!((4.0 * x[0] + x[1] - 1.0).abs() < 1e-14);
        let singular = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(inverse_spd(&singular).is_err());
        assert!(inverse_spd(&Matrix::zeros(1, 1)).is_err());
    }
}
