//! Robust generalised least squares with noisy design rows.
//!
//! Each design row `d_i` carries a diagonal covariance `S_i`. The normal
//! matrix is `J = sum w_i^2 (d_i d_i' + S_i)`, so design noise acts like a
//! per-row ridge penalty.

use crate::error::{Error, Result};
use crate::fixed_point::{aitken, FixedPointOptions};
use crate::matrix::{dot, inverse_spd, Matrix};
use crate::weights::WeightSpec;

/// Residual scales below this fraction of the response size count as an exact fit.
const EXACT_FIT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionProblem {
    y: Vec<f64>,
    design: Matrix,
    /// Row `i` holds the diagonal of `S_i`.
    design_var: Option<Matrix>,
}

impl RegressionProblem {
    pub fn new(y: Vec<f64>, design: Matrix, design_var: Option<Matrix>) -> Result<RegressionProblem> {
        let (n, p) = design.shape();
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} responses for {n} design rows",
                y.len()
            )));
        }
        if n < p {
            return Err(Error::InvalidArgument(format!(
                "{n} observations cannot determine {p} coefficients"
            )));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        if let Some(s) = &design_var {
            if s.shape() != (n, p) {
                return Err(Error::DimensionMismatch(format!(
                    "design variances are {}x{}, expected {n}x{p}",
                    s.rows(),
                    s.cols()
                )));
            }
            if s.as_slice().iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidArgument("design variances must be non-negative".into()));
            }
        }
        Ok(RegressionProblem { y, design, design_var })
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn design(&self) -> &Matrix {
        &self.design
    }

    pub fn design_var(&self) -> Option<&Matrix> {
        self.design_var.as_ref()
    }

    pub fn n(&self) -> usize {
        self.design.rows()
    }

    pub fn p(&self) -> usize {
        self.design.cols()
    }

    fn var_row(&self, i: usize) -> Option<&[f64]> {
        self.design_var.as_ref().map(|s| s.row(i))
    }

    fn residuals(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.n())
            .map(|i| self.y[i] - dot(self.design.row(i), beta))
            .collect()
    }

    /// `J = sum W_i (d_i d_i' + S_i)` for the given squared weights.
    fn normal_matrix(&self, w2: &[f64]) -> Matrix {
        let p = self.p();
        let mut j = Matrix::zeros(p, p);
        for (i, &wi) in w2.iter().enumerate() {
            let d = self.design.row(i);
            for a in 0..p {
                for b in 0..p {
                    j[(a, b)] += wi * d[a] * d[b];
                }
                if let Some(s) = self.var_row(i) {
                    j[(a, a)] += wi * s[a];
                }
            }
        }
        j
    }

    fn inverse_normal(&self, w2: &[f64]) -> Result<Matrix> {
        inverse_spd(&self.normal_matrix(w2)).map_err(|condition| Error::SingularNormalMatrix { condition })
    }

    /// `beta = J^-1 D' W y` together with `J^-1`.
    fn solve(&self, w2: &[f64]) -> Result<(Vec<f64>, Matrix)> {
        let j_inv = self.inverse_normal(w2)?;
        let p = self.p();
        let mut rhs = vec![0.0; p];
        for (i, &wi) in w2.iter().enumerate() {
            let d = self.design.row(i);
            for a in 0..p {
                rhs[a] += wi * d[a] * self.y[i];
            }
        }
        Ok((j_inv.mul_vec(&rhs), j_inv))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionEstimate {
    pub beta: Vec<f64>,
    /// Weighted residual scale, before any consistency factor.
    pub s: f64,
    pub weights: Vec<f64>,
    /// `None` when the effective sample size does not exceed `p`.
    pub cov_beta: Option<Matrix>,
    /// `(sum w^2)^2 / sum w^4`.
    pub n_eff: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn weighted_scale(residuals: &[f64], w2: &[f64]) -> f64 {
    let num: f64 = residuals.iter().zip(w2).map(|(r, w)| w * r * r).sum();
    let den: f64 = w2.iter().sum();
    (num / den).sqrt()
}

fn effective_size(w2: &[f64]) -> f64 {
    let s2: f64 = w2.iter().sum();
    let s4: f64 = w2.iter().map(|w| w * w).sum();
    s2 * s2 / s4
}

/// Robust generalised least squares with default iteration controls.
///
/// ```
/// use tsvd_core::matrix::Matrix;
/// use tsvd_core::regress::{robust_gls, RegressionProblem};
/// use tsvd_core::weights::WeightSpec;
///
/// let design = Matrix::from_rows(&[[1.0], [1.0], [1.0]]).unwrap();
/// let prob = RegressionProblem::new(vec![1.0, 2.0, 3.0], design, None).unwrap();
/// let est = robust_gls(&prob, &WeightSpec::least_squares(), 1e-10, 500).unwrap();
/// assert!((est.beta[0] - 2.0).abs() < 1e-14);
/// ```
pub fn robust_gls(
    prob: &RegressionProblem,
    spec: &WeightSpec,
    tol: f64,
    max_iter: usize,
) -> Result<RegressionEstimate> {
    let opts = FixedPointOptions {
        tol,
        max_iter,
        ..FixedPointOptions::default()
    };
    robust_gls_with(prob, spec, &opts)
}

/// The reweighting fixed point, started from the unweighted solution.
///
/// Weights use `u = residual / (k3 s)`; the normal equations and the scale
/// use squared weights.
pub fn robust_gls_with(
    prob: &RegressionProblem,
    spec: &WeightSpec,
    opts: &FixedPointOptions,
) -> Result<RegressionEstimate> {
    let n = prob.n();
    let ones = vec![1.0; n];
    let (mut beta, _) = prob.solve(&ones)?;
    let mut s = weighted_scale(&prob.residuals(&beta), &ones);
    let y_scale = (prob.y.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();

    let finish = |beta: Vec<f64>, s: f64, w: Vec<f64>, converged, iterations| {
        let mut est = RegressionEstimate {
            n_eff: effective_size(&w.iter().map(|v| v * v).collect::<Vec<_>>()),
            beta,
            s,
            weights: w,
            cov_beta: None,
            converged,
            iterations,
        };
        est.cov_beta = match covariance(&est, prob, spec) {
            Ok(c) => Some(c),
            Err(Error::DegenerateDoF { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(est)
    };

    if s <= EXACT_FIT_TOLERANCE * y_scale {
        return finish(beta, 0.0, ones, true, 1);
    }
    if !spec.is_robust() {
        return finish(beta, s, ones, true, 1);
    }

    let p = prob.p();
    let mut previous: Option<Vec<f64>> = None;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let w2: Vec<f64> = prob
            .residuals(&beta)
            .iter()
            .map(|&r| spec.residual_weight(r, s).powi(2))
            .collect();
        let (beta1, _) = prob.solve(&w2)?;
        let s1 = weighted_scale(&prob.residuals(&beta1), &w2);
        if s1 <= EXACT_FIT_TOLERANCE * y_scale || !s1.is_finite() {
            // The weighted fit became exact; keep the last weights.
            let w = w2.iter().map(|v| v.sqrt()).collect();
            return finish(beta1, 0.0, w, true, iterations);
        }
        let step = beta
            .iter()
            .zip(&beta1)
            .map(|(a, b)| (a - b).abs())
            .fold((s - s1).abs(), f64::max);
        if step < opts.tol * s1 {
            beta = beta1;
            s = s1;
            converged = true;
            break;
        }
        let mut current = beta.clone();
        current.push(s);
        let mut next = beta1;
        next.push(s1);
        if opts.accelerate && iterations % 3 == 0 {
            if let Some(acc) = previous.as_deref().and_then(|p0| aitken(p0, &current, &next)) {
                if acc[p] > 0.0 {
                    s = acc[p];
                    beta = acc[..p].to_vec();
                    previous = None;
                    continue;
                }
            }
        }
        previous = Some(current);
        s = next[p];
        next.truncate(p);
        beta = next;
    }

    let w: Vec<f64> = prob
        .residuals(&beta)
        .iter()
        .map(|&r| spec.residual_weight(r, s))
        .collect();
    let est = finish(beta, s, w, converged, iterations)?;
    if converged {
        Ok(est)
    } else {
        Err(Error::RegressionMaxIter {
            iterations,
            last: Box::new(est),
        })
    }
}

fn outer_add(m: &mut Matrix, scale: f64, a: &[f64], b: &[f64]) {
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            m[(i, j)] += scale * ai * bj;
        }
    }
}

fn sandwich(j_inv: &Matrix, middle: &Matrix, factor: f64) -> Result<Matrix> {
    let c = j_inv.matmul(middle).matmul(j_inv).scale(factor);
    let sym = c.add(&c.transpose()).scale(0.5);
    Matrix::from_computed(sym.rows(), sym.cols(), sym.into_vec())
}

/// `k2^2 N/(N-p) J^-1 { sum w^4 [s^2 d d' + (S beta)(S beta)'] } J^-1`.
///
/// The factor `k2` comes from `spec` and is 1 for least squares.
pub fn covariance(est: &RegressionEstimate, prob: &RegressionProblem, spec: &WeightSpec) -> Result<Matrix> {
    let p = prob.p();
    let w2: Vec<f64> = est.weights.iter().map(|w| w * w).collect();
    let n_eff = effective_size(&w2);
    if n_eff <= p as f64 {
        return Err(Error::DegenerateDoF {
            n_eff,
            params: p as f64,
        });
    }
    let j_inv = prob.inverse_normal(&w2)?;
    let mut middle = Matrix::zeros(p, p);
    for (i, &wi) in w2.iter().enumerate() {
        let w4 = wi * wi;
        let d = prob.design.row(i);
        outer_add(&mut middle, w4 * est.s * est.s, d, d);
        if let Some(s) = prob.var_row(i) {
            let sb: Vec<f64> = s.iter().zip(&est.beta).map(|(v, b)| v * b).collect();
            outer_add(&mut middle, w4, &sb, &sb);
        }
    }
    let factor = spec.k2().powi(2) * n_eff / (n_eff - p as f64);
    sandwich(&j_inv, &middle, factor)
}

/// Unsmoothed sandwich estimator `N/(N-1) J^-1 { sum w^4 g g' } J^-1` with
/// `g = e d - S beta`. Kept for diagnostics; it is far noisier than
/// [`covariance`].
pub fn sandwich_covariance(est: &RegressionEstimate, prob: &RegressionProblem) -> Result<Matrix> {
    let p = prob.p();
    let w2: Vec<f64> = est.weights.iter().map(|w| w * w).collect();
    let n_eff = effective_size(&w2);
    if n_eff <= 1.0 {
        return Err(Error::DegenerateDoF {
            n_eff,
            params: 1.0,
        });
    }
    let j_inv = prob.inverse_normal(&w2)?;
    let residuals = prob.residuals(&est.beta);
    let mut middle = Matrix::zeros(p, p);
    for (i, &wi) in w2.iter().enumerate() {
        let d = prob.design.row(i);
        let g: Vec<f64> = (0..p)
            .map(|a| {
                let sb = prob.var_row(i).map_or(0.0, |s| s[a] * est.beta[a]);
                residuals[i] * d[a] - sb
            })
            .collect();
        outer_add(&mut middle, wi * wi, &g, &g);
    }
    sandwich(&j_inv, &middle, n_eff / (n_eff - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::{calibrate, CalibrationTarget, Power};

    fn ones(n: usize) -> Matrix {
        Matrix::filled(n, 1, 1.0)
    }

    #[test]
    fn mean_as_regression() {
        let prob = RegressionProblem::new(vec![1.0, 2.0, 3.0], ones(3), None).unwrap();
        let est = robust_gls(&prob, &WeightSpec::least_squares(), 1e-10, 500).unwrap();
        assert!((est.beta[0] - 2.0).abs() < 1e-15);
        assert!((est.s - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(est.n_eff, 3.0);
    }

    #[test]
    fn scalar_ridge() {
        let s = Matrix::filled(1, 1, 1.0);
        let prob = RegressionProblem::new(vec![1.0], ones(1), Some(s)).unwrap();
        let est = robust_gls(&prob, &WeightSpec::least_squares(), 1e-10, 500).unwrap();
        assert_eq!(est.beta, vec![0.5]);
        // One effective observation leaves no degrees of freedom.
        assert!(est.cov_beta.is_none());
    }

    #[test]
    fn variance_of_a_mean() {
        // n = 3, y = (1, 2, 4): s^2 = 14/9 and Cov = (3/2) s^2 / 3 = 7/9.
        let prob = RegressionProblem::new(vec![1.0, 2.0, 4.0], ones(3), None).unwrap();
        let est = robust_gls(&prob, &WeightSpec::least_squares(), 1e-10, 500).unwrap();
        let cov = est.cov_beta.unwrap();
        assert!((cov[(0, 0)] - 7.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn ols_covariance_identity() {
        let rows = [
            [1.0, 0.3],
            [1.0, -1.2],
            [1.0, 0.8],
            [1.0, 2.1],
            [1.0, -0.4],
            [1.0, 1.5],
        ];
        let design = Matrix::from_rows(&rows).unwrap();
        let y = vec![0.9, -2.0, 2.2, 4.1, 0.1, 2.6];
        let prob = RegressionProblem::new(y.clone(), design.clone(), None).unwrap();
        let est = robust_gls(&prob, &WeightSpec::least_squares(), 1e-10, 500).unwrap();

        // Normal equations solved by hand: (D'D) beta = D'y.
        let dtd = design.transpose().matmul(&design);
        let det = dtd[(0, 0)] * dtd[(1, 1)] - dtd[(0, 1)] * dtd[(1, 0)];
        let inv = Matrix::from_rows(&[
            [dtd[(1, 1)] / det, -dtd[(0, 1)] / det],
            [-dtd[(1, 0)] / det, dtd[(0, 0)] / det],
        ])
        .unwrap();
        let dty = design.transpose().mul_vec(&y);
        let beta = inv.mul_vec(&dty);
        for (got, want) in est.beta.iter().zip(&beta) {
            assert!((got - want).abs() < 1e-12);
        }
        let expected = inv.scale(6.0 / 4.0 * est.s * est.s);
        assert!(est.cov_beta.unwrap().sub(&expected).max_abs() < 1e-14);
    }

    #[test]
    fn exact_fit_gives_zero_scale() {
        let design = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0], [1.0, 2.0]]).unwrap();
        let prob = RegressionProblem::new(vec![1.0, 3.0, 5.0], design, None).unwrap();
        let spec = calibrate(CalibrationTarget::K3(1.0), Power::Four).unwrap();
        let est = robust_gls(&prob, &spec, 1e-10, 500).unwrap();
        assert_eq!(est.s, 0.0);
        assert!(est.weights.iter().all(|&w| w == 1.0));
        assert!((est.beta[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_design_is_reported() {
        let design = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        let prob = RegressionProblem::new(vec![1.0, 2.0, 3.5], design, None).unwrap();
        assert!(matches!(
            robust_gls(&prob, &WeightSpec::least_squares(), 1e-10, 500),
            Err(Error::SingularNormalMatrix { .. })
        ));
    }

    #[test]
    fn robust_fit_downweights_outlier() {
        let xs: Vec<f64> = (0..12).map(f64::from).collect();
        let noise = [0.1, -0.2, 0.15, 0.05, -0.1, 0.2, -0.15, 0.0, 0.1, -0.05, 0.12, -0.08];
        let mut y: Vec<f64> = xs.iter().zip(noise).map(|(x, e)| 1.0 + 2.0 * x + e).collect();
        y[11] += 40.0;
        let design = Matrix::from_fn(12, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let prob = RegressionProblem::new(y, design, None).unwrap();
        let spec = calibrate(CalibrationTarget::K3(1.5), Power::Four).unwrap();
        let est = robust_gls(&prob, &spec, 1e-10, 500).unwrap();
        assert!(est.converged);
        assert!(est.weights[11] < 0.05);
        assert!((est.beta[1] - 2.0).abs() < 0.05);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(RegressionProblem::new(vec![1.0; 2], ones(3), None).is_err());
        assert!(RegressionProblem::new(vec![1.0; 3], ones(3), Some(Matrix::filled(3, 1, -1.0))).is_err());
    }
}
