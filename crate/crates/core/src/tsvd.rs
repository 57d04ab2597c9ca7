//! Low-rank approximation `X ~ A B'` by alternating weighted regressions.
//!
//! Three variants share one loop:
//!
//! * ordinary: least-squares alternation, unit weights;
//! * robust: entry weights from the scaled residuals, refreshed every cycle;
//! * total: each regression also accounts for the estimated variances of the
//!   fixed factor, which enter like a ridge penalty. The variance terms are
//!   switched on gradually through a continuation parameter `t` in `[0, 1]`.
//!
//! The final factorization `A B' = U diag(lambda) V'` is taken with the
//! classical SVD.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fixed_point::aitken;
use crate::matrix::{classical_svd, dot, inverse_spd, orthonormalize, Matrix, Svd};
use crate::regress::{robust_gls, RegressionProblem};
use crate::weights::{TuningConstant, WeightSpec};

/// Residuals below this fraction of the data size count as an exact fit.
const EXACT_FIT_TOLERANCE: f64 = 1e-12;
const WEIGHT_TOLERANCE: f64 = 1e-10;
const WEIGHT_MAX_ITER: usize = 1000;
const BASELINE_MAX_ITER: usize = 100_000;
const MAX_HALVINGS: u32 = 6;

/// Which `k2` multiplies the factor covariances in the total variant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CovarianceCorrection {
    /// Factor 1: the uncorrected weighted covariance.
    #[default]
    Unit,
    /// The spec's `k2^2`, as for a single robust regression.
    FromSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TsvdConfig {
    pub rank: usize,
    pub spec: WeightSpec,
    /// Include the factor-variance terms.
    pub total: bool,
    /// Values of `t`, from 0 to 1. Only used when `total` is set.
    pub continuation: Vec<f64>,
    /// Relative change of `A B'` and `s` that ends a stage.
    pub tol: f64,
    /// Cycle limit per continuation stage.
    pub max_outer: usize,
    /// Seed of the random start of the least-squares initializer.
    pub seed: u64,
    pub covariance_correction: CovarianceCorrection,
}

impl TsvdConfig {
    pub fn new(rank: usize, spec: WeightSpec) -> TsvdConfig {
        TsvdConfig {
            rank,
            spec,
            total: false,
            continuation: uniform_schedule(11),
            tol: 1e-8,
            max_outer: 200,
            seed: 42,
            covariance_correction: CovarianceCorrection::default(),
        }
    }

    pub fn total(mut self, total: bool) -> TsvdConfig {
        self.total = total;
        self
    }

    pub fn continuation_steps(mut self, points: usize) -> TsvdConfig {
        self.continuation = uniform_schedule(points);
        self
    }

    pub fn tol(mut self, tol: f64) -> TsvdConfig {
        self.tol = tol;
        self
    }

    pub fn seed(mut self, seed: u64) -> TsvdConfig {
        self.seed = seed;
        self
    }

    pub fn covariance_correction(mut self, c: CovarianceCorrection) -> TsvdConfig {
        self.covariance_correction = c;
        self
    }

    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        if self.rank == 0 || self.rank > m.min(n) {
            return Err(Error::InvalidArgument(format!(
                "rank must lie in 1..={}, got {}",
                m.min(n),
                self.rank
            )));
        }
        let sched = &self.continuation;
        let increasing = sched.windows(2).all(|w| w[0] < w[1]);
        if sched.len() < 2 || sched[0] != 0.0 || sched[sched.len() - 1] != 1.0 || !increasing {
            return Err(Error::InvalidArgument(
                "continuation must increase strictly from 0 to 1".into(),
            ));
        }
        if !(self.tol > 0.0) || self.max_outer == 0 {
            return Err(Error::InvalidArgument("tolerance and cycle limit must be positive".into()));
        }
        Ok(())
    }

    fn stages(&self) -> Vec<f64> {
        if self.total {
            self.continuation.clone()
        } else {
            vec![0.0]
        }
    }

    fn step_options(&self, t: f64) -> StepOptions {
        StepOptions {
            total: self.total,
            t,
            covariance_factor: match self.covariance_correction {
                CovarianceCorrection::Unit => 1.0,
                CovarianceCorrection::FromSpec => self.spec.k2().powi(2),
            },
        }
    }
}

/// `points` equally spaced values from 0 to 1.
pub fn uniform_schedule(points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points).map(|i| i as f64 / (points - 1) as f64).collect()
}

/// `(m + n - (p + 1)/2) p`, the parameter count of a rank-`p` factorization.
pub fn degrees_of_freedom(m: usize, n: usize, p: usize) -> f64 {
    (m as f64 + n as f64 - (p as f64 + 1.0) / 2.0) * p as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct TsvdState {
    /// `m x p`, orthonormal columns.
    pub a: Matrix,
    /// `n x p`.
    pub b: Matrix,
    /// Entry variances of `a`.
    pub var_a: Matrix,
    /// Entry variances of `b`.
    pub var_b: Matrix,
    /// `m x n` entry weights used by the last cycle.
    pub weights: Matrix,
    /// Residual scale.
    pub s: f64,
    pub nu: f64,
}

impl TsvdState {
    pub fn approximation(&self) -> Matrix {
        self.a.matmul_transpose(&self.b)
    }
}

#[derive(Clone, Debug)]
pub struct TsvdResult {
    pub state: TsvdState,
    /// `A B'`.
    pub approximation: Matrix,
    /// The leading `p` singular values of `A B'`, descending.
    pub singular_values: Vec<f64>,
    pub u: Matrix,
    pub v: Matrix,
    pub outer_iterations: usize,
    pub converged: bool,
}

/// Rank-`p` least-squares factors by alternating regressions.
///
/// Starts from a seeded random orthonormal `A` and stops when the relative
/// Frobenius change of `A B'` drops below `tol`. `A` comes back orthonormal
/// and `B = X' A`.
pub fn baseline_alternating_svd(x: &Matrix, p: usize, tol: f64, seed: u64) -> Result<(Matrix, Matrix)> {
    let (a, b, _) = baseline_alternating_svd_traced(x, p, tol, seed)?;
    Ok((a, b))
}

/// [`baseline_alternating_svd`], also returning the Frobenius residual after
/// every half-step.
pub fn baseline_alternating_svd_traced(
    x: &Matrix,
    p: usize,
    tol: f64,
    seed: u64,
) -> Result<(Matrix, Matrix, Vec<f64>)> {
    let (m, n) = x.shape();
    if p == 0 || p > m.min(n) {
        return Err(Error::InvalidArgument(format!("rank must lie in 1..={}, got {p}", m.min(n))));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Matrix::from_fn(m, p, |_, _| rng.random_range(-1.0..1.0));
    let mut a = orthonormalize(&start)?;
    let mut trace = Vec::new();
    let mut previous: Option<Matrix> = None;
    let scale = x.frobenius_norm();
    for _ in 0..BASELINE_MAX_ITER {
        let b = x.transpose().matmul(&a);
        let approx = a.matmul_transpose(&b);
        trace.push(x.sub(&approx).frobenius_norm());
        if let Some(prev) = &previous {
            let change = approx.sub(prev).frobenius_norm();
            if change <= tol * approx.frobenius_norm().max(f64::MIN_POSITIVE) || scale == 0.0 {
                return Ok((a, b, trace));
            }
        }
        previous = Some(approx);

        // A = X B (B'B)^-1, then re-orthonormalize.
        let btb = b.transpose().matmul(&b);
        let inv = inverse_spd(&btb).map_err(|condition| Error::SingularNormalMatrix { condition })?;
        let a_raw = x.matmul(&b).matmul(&inv);
        trace.push(x.sub(&a_raw.matmul_transpose(&b)).frobenius_norm());
        a = orthonormalize(&a_raw)?;
    }
    Err(Error::MaxIterExceeded {
        iterations: BASELINE_MAX_ITER,
    })
}

/// Entry weights with the matching residual scale.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightEvaluation {
    pub weights: Matrix,
    pub s: f64,
    /// `(sum w)^2 / sum w^2`.
    pub n_eff: f64,
    pub nu: f64,
}

/// Entry weights from the residuals `X - A B'`.
///
/// The weights use `u = f / (k3 s)` and the scale solves
/// `s^2 = N/(N - nu) sum w^2 f^2 / sum w^2` jointly with them.
pub fn evaluate_weights(x: &Matrix, a: &Matrix, b: &Matrix, spec: &WeightSpec, s_init: f64) -> Result<WeightEvaluation> {
    let residual_sq = x.sub(&a.matmul_transpose(b)).map(|f| f * f);
    weights_from_squared_residuals(&residual_sq, x.max_abs(), a.cols(), spec, s_init)
}

/// Squared total error of each entry: the squared residual plus `t` times
/// `a_i' diag(var b_j) a_i + b_j' diag(var a_i) b_j`.
pub fn total_squared_error(x: &Matrix, a: &Matrix, b: &Matrix, var_a: &Matrix, var_b: &Matrix, t: f64) -> Matrix {
    let approx = a.matmul_transpose(b);
    Matrix::from_fn(x.rows(), x.cols(), |i, j| {
        let f = x[(i, j)] - approx[(i, j)];
        let spread: f64 = (0..a.cols())
            .map(|k| a[(i, k)].powi(2) * var_b[(j, k)] + var_a[(i, k)] * b[(j, k)].powi(2))
            .sum();
        f * f + t * spread
    })
}

/// [`evaluate_weights`] driven by the total error of [`total_squared_error`].
#[allow(clippy::too_many_arguments)]
pub fn evaluate_weights_total(
    x: &Matrix,
    a: &Matrix,
    b: &Matrix,
    var_a: &Matrix,
    var_b: &Matrix,
    t: f64,
    spec: &WeightSpec,
    s_init: f64,
) -> Result<WeightEvaluation> {
    let err = total_squared_error(x, a, b, var_a, var_b, t);
    weights_from_squared_residuals(&err, x.max_abs(), a.cols(), spec, s_init)
}

fn weights_from_squared_residuals(
    residual_sq: &Matrix,
    data_scale: f64,
    p: usize,
    spec: &WeightSpec,
    s_init: f64,
) -> Result<WeightEvaluation> {
    let (m, n) = residual_sq.shape();
    let nu = degrees_of_freedom(m, n, p);
    let count = (m * n) as f64;
    if count <= nu {
        return Err(Error::DoFExhausted { n_eff: count, nu });
    }
    let f2 = residual_sq.as_slice();
    let ones = Matrix::filled(m, n, 1.0);
    let exact = (EXACT_FIT_TOLERANCE * data_scale).powi(2);
    if f2.iter().all(|&v| v <= exact) {
        return Ok(WeightEvaluation {
            weights: ones,
            s: 0.0,
            n_eff: count,
            nu,
        });
    }
    let plain_s = (count / (count - nu) * f2.iter().sum::<f64>() / count).sqrt();
    let k3 = match spec.k3() {
        TuningConstant::Infinite => {
            return Ok(WeightEvaluation {
                weights: ones,
                s: plain_s,
                n_eff: count,
                nu,
            })
        }
        TuningConstant::Finite(k3) => k3,
    };

    let q = spec.q();
    let weights_at = |s: f64| -> Vec<f64> {
        f2.iter().map(|&v| crate::weights::weight(v.sqrt() / (k3 * s), q)).collect()
    };
    let next_scale = |s: f64| -> Result<(f64, f64)> {
        let w = weights_at(s);
        let sw: f64 = w.iter().sum();
        let sw2: f64 = w.iter().map(|v| v * v).sum();
        let n_eff = sw * sw / sw2;
        if n_eff <= nu {
            return Err(Error::DoFExhausted { n_eff, nu });
        }
        let swf: f64 = w.iter().zip(f2).map(|(w, f)| w * w * f).sum();
        Ok(((n_eff / (n_eff - nu) * swf / sw2).sqrt(), n_eff))
    };

    let mut s = if s_init > 0.0 && s_init.is_finite() { s_init } else { plain_s };
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    for it in 1..=WEIGHT_MAX_ITER {
        let (s1, _) = next_scale(s)?;
        if (s1 - s).abs() < WEIGHT_TOLERANCE * s1 {
            s = s1;
            converged = true;
            break;
        }
        if it % 3 == 0 && history.len() == 2 {
            if let Some(acc) = aitken(&[history[0]], &[s], &[s1]) {
                if acc[0] > 0.0 {
                    s = acc[0];
                    history.clear();
                    continue;
                }
            }
        }
        history.push(s);
        if history.len() > 2 {
            history.remove(0);
        }
        s = s1;
    }
    if !converged {
        return Err(Error::MaxIterExceeded {
            iterations: WEIGHT_MAX_ITER,
        });
    }
    let w = weights_at(s);
    let (_, n_eff) = next_scale(s)?;
    Ok(WeightEvaluation {
        weights: Matrix::from_computed(m, n, w)?,
        s,
        n_eff,
        nu,
    })
}

/// How the variance terms enter a factor step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOptions {
    /// Use the fixed factor's variances and report the new ones.
    pub total: bool,
    /// Continuation parameter scaling the variance terms.
    pub t: f64,
    /// Multiplier of the reported covariances.
    pub covariance_factor: f64,
}

impl StepOptions {
    /// Plain weighted least squares: no variance terms.
    pub fn ordinary() -> StepOptions {
        StepOptions {
            total: false,
            t: 0.0,
            covariance_factor: 1.0,
        }
    }

    pub fn total(t: f64) -> StepOptions {
        StepOptions {
            total: true,
            t,
            covariance_factor: 1.0,
        }
    }
}

/// Output of one factor update.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorStep {
    /// The new factor; orthonormalized for the `A` step.
    pub factor: Matrix,
    /// The factor as solved, before any orthonormalization.
    pub unnormalized: Matrix,
    /// Entry variances of the new factor (zero unless total).
    pub variances: Matrix,
    /// Weighted residual scale of every regression.
    pub scales: Vec<f64>,
}

/// Solves one regression per column of `x` with design `fixed`.
///
/// Column `j` uses squared weights from column `j` of `w`, and each design
/// row `i` carries the diagonal covariance `t * var_fixed[i]`.
fn column_regressions(x: &Matrix, fixed: &Matrix, var_fixed: &Matrix, w: &Matrix, opts: &StepOptions) -> Result<FactorStep> {
    let (m, n) = x.shape();
    let p = fixed.cols();
    let ridge = if opts.total { opts.t } else { 0.0 };
    let mut factor = Matrix::zeros(n, p);
    let mut variances = Matrix::zeros(n, p);
    let mut scales = Vec::with_capacity(n);
    for j in 0..n {
        let w2: Vec<f64> = (0..m).map(|i| w[(i, j)].powi(2)).collect();
        let mut jm = Matrix::zeros(p, p);
        let mut rhs = vec![0.0; p];
        for i in 0..m {
            let d = fixed.row(i);
            for a in 0..p {
                for c in 0..p {
                    jm[(a, c)] += w2[i] * d[a] * d[c];
                }
                jm[(a, a)] += w2[i] * ridge * var_fixed[(i, a)];
                rhs[a] += w2[i] * d[a] * x[(i, j)];
            }
        }
        let j_inv = inverse_spd(&jm).map_err(|_| Error::SingularColumnSystem(j))?;
        let beta = j_inv.mul_vec(&rhs);
        let sw2: f64 = w2.iter().sum();
        let sw4: f64 = w2.iter().map(|v| v * v).sum();
        let sr2: f64 = (0..m).map(|i| w2[i] * (x[(i, j)] - dot(fixed.row(i), &beta)).powi(2)).sum();
        let s2 = sr2 / sw2;
        if opts.total {
            let n_j = sw2 * sw2 / sw4;
            if n_j <= p as f64 {
                return Err(Error::DegenerateDoF {
                    n_eff: n_j,
                    params: p as f64,
                });
            }
            let mut middle = Matrix::zeros(p, p);
            for i in 0..m {
                let d = fixed.row(i);
                let w4 = w2[i] * w2[i];
                let sb: Vec<f64> = (0..p).map(|a| ridge * var_fixed[(i, a)] * beta[a]).collect();
                for a in 0..p {
                    for c in 0..p {
                        middle[(a, c)] += w4 * (s2 * d[a] * d[c] + sb[a] * sb[c]);
                    }
                }
            }
            let cov = j_inv.matmul(&middle).matmul(&j_inv);
            let factor_scale = opts.covariance_factor * n_j / (n_j - p as f64);
            for a in 0..p {
                variances[(j, a)] = factor_scale * cov[(a, a)];
            }
        }
        factor.set_row(j, &beta);
        scales.push(s2.sqrt());
    }
    let factor = Matrix::from_computed(n, p, factor.into_vec())?;
    Ok(FactorStep {
        unnormalized: factor.clone(),
        factor,
        variances,
        scales,
    })
}

/// Updates `B` given `A`: one weighted regression per column of `x`.
pub fn estimate_b_step(x: &Matrix, a: &Matrix, var_a: &Matrix, w: &Matrix, opts: &StepOptions) -> Result<FactorStep> {
    column_regressions(x, a, var_a, w, opts)
}

/// Updates `A` given `B`: one weighted regression per row of `x`, followed
/// by orthonormalization. Variances are carried over unchanged.
pub fn estimate_a_step(x: &Matrix, b: &Matrix, var_b: &Matrix, w: &Matrix, opts: &StepOptions) -> Result<FactorStep> {
    let mut step = column_regressions(&x.transpose(), b, var_b, &w.transpose(), opts).map_err(|e| match e {
        Error::SingularColumnSystem(i) => Error::SingularRowSystem(i),
        other => other,
    })?;
    step.factor = orthonormalize(&step.unnormalized)?;
    Ok(step)
}

/// Least-squares starting state, with zero variances and unit weights.
pub fn initial_state(x: &Matrix, cfg: &TsvdConfig) -> Result<TsvdState> {
    let (m, n) = x.shape();
    cfg.validate(m, n)?;
    let p = cfg.rank;
    let nu = degrees_of_freedom(m, n, p);
    let count = (m * n) as f64;
    if count <= nu {
        return Err(Error::DoFExhausted { n_eff: count, nu });
    }
    let (a, b) = baseline_alternating_svd(x, p, 1e-12, cfg.seed)?;
    let residual = x.sub(&a.matmul_transpose(&b)).frobenius_norm();
    Ok(TsvdState {
        a,
        b,
        var_a: Matrix::zeros(m, p),
        var_b: Matrix::zeros(n, p),
        weights: Matrix::filled(m, n, 1.0),
        s: (residual * residual / (count - nu)).sqrt(),
        nu,
    })
}

/// One full cycle: weights, then `B`, then `A`, all with the same weights.
pub fn cycle(x: &Matrix, state: &TsvdState, cfg: &TsvdConfig, t: f64) -> Result<TsvdState> {
    let st = state;
    let eval = if cfg.total {
        evaluate_weights_total(x, &st.a, &st.b, &st.var_a, &st.var_b, t, &cfg.spec, st.s)?
    } else {
        evaluate_weights(x, &st.a, &st.b, &cfg.spec, st.s)?
    };
    let opts = cfg.step_options(t);
    let b_step = estimate_b_step(x, &st.a, &st.var_a, &eval.weights, &opts)?;
    let a_step = estimate_a_step(x, &b_step.factor, &b_step.variances, &eval.weights, &opts)?;
    Ok(TsvdState {
        a: a_step.factor,
        b: b_step.factor,
        var_a: a_step.variances,
        var_b: b_step.variances,
        weights: eval.weights,
        s: eval.s,
        nu: eval.nu,
    })
}

/// Outcome of running the cycle to a fixed point at one value of `t`.
#[derive(Clone, Debug)]
pub struct StageOutcome {
    pub state: TsvdState,
    pub iterations: usize,
    pub converged: bool,
}

/// Cycles from `start` at fixed `t` until `A B'` and `s` settle.
pub fn solve_stage(x: &Matrix, start: &TsvdState, cfg: &TsvdConfig, t: f64) -> Result<StageOutcome> {
    let mut state = start.clone();
    let mut approx = state.approximation();
    for it in 1..=cfg.max_outer {
        let next = cycle(x, &state, cfg, t)?;
        let next_approx = next.approximation();
        let size = next_approx.max_abs().max(f64::MIN_POSITIVE);
        let change = next_approx.sub(&approx).max_abs() / size;
        let s_change = if next.s > 0.0 { (next.s - state.s).abs() / next.s } else { state.s.abs() };
        state = next;
        approx = next_approx;
        if change < cfg.tol && s_change < cfg.tol {
            return Ok(StageOutcome {
                state,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(StageOutcome {
        state,
        iterations: cfg.max_outer,
        converged: false,
    })
}

/// Full decomposition: least-squares start, continuation over `t`, and the
/// final singular value decomposition of `A B'`.
///
/// ```
/// use tsvd_core::matrix::Matrix;
/// use tsvd_core::tsvd::{total_svd, TsvdConfig};
/// use tsvd_core::weights::WeightSpec;
///
/// let x = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
/// let res = total_svd(&x, &TsvdConfig::new(1, WeightSpec::least_squares())).unwrap();
/// assert!(res.approximation.sub(&x).max_abs() < 1e-10);
/// ```
pub fn total_svd(x: &Matrix, cfg: &TsvdConfig) -> Result<TsvdResult> {
    let mut good = initial_state(x, cfg)?;
    let mut t_good = 0.0;
    let mut outer_iterations = 0;
    for target in cfg.stages() {
        let mut halvings = 0u32;
        let mut attempts = 0;
        loop {
            attempts += 1;
            let t = if halvings == 0 {
                target
            } else {
                t_good + (target - t_good) / f64::from(1u32 << halvings)
            };
            let outcome = solve_stage(x, &good, cfg, t)?;
            outer_iterations += outcome.iterations;
            if outcome.converged {
                good = outcome.state;
                t_good = t;
                if t == target {
                    break;
                }
                halvings = 0;
            } else {
                halvings += 1;
            }
            if halvings > MAX_HALVINGS || attempts > 64 {
                return Err(Error::ContinuationStall {
                    t: target,
                    last_good: t_good,
                    state: Box::new(good),
                });
            }
        }
    }

    let svd = singular_values_of(&good.a, &good.b)?;
    let p = cfg.rank;
    Ok(TsvdResult {
        approximation: good.approximation(),
        singular_values: svd.values()[..p].to_vec(),
        u: svd.u.leading_columns(p),
        v: svd.v.leading_columns(p),
        state: good,
        outer_iterations,
        converged: true,
    })
}

/// Classical SVD of `A B'`.
///
/// ```
/// use tsvd_core::matrix::Matrix;
/// use tsvd_core::tsvd::singular_values_of;
///
/// let a = Matrix::from_rows(&[[2.0], [0.0]]).unwrap();
/// let b = Matrix::from_rows(&[[3.0], [0.0], [0.0]]).unwrap();
/// let svd = singular_values_of(&a, &b).unwrap();
/// assert!((svd.values()[0] - 6.0).abs() < 1e-12);
/// ```
pub fn singular_values_of(a: &Matrix, b: &Matrix) -> Result<Svd> {
    classical_svd(&a.matmul_transpose(b))
}

/// The total-error objective: weighted squared residuals plus the
/// factor-variance terms scaled by `t`.
pub fn objective(x: &Matrix, state: &TsvdState, t: f64) -> f64 {
    let err = total_squared_error(x, &state.a, &state.b, &state.var_a, &state.var_b, t);
    err.as_slice()
        .iter()
        .zip(state.weights.as_slice())
        .map(|(e, w)| w * w * e)
        .sum()
}

/// Weights of robust regressions of each column of `x` on the fixed factor `a`.
///
/// Each column is fitted independently with its own scale, starting from
/// least squares. Useful to see which entries a given factor would treat as
/// outliers.
pub fn column_fit_weights(x: &Matrix, a: &Matrix, spec: &WeightSpec) -> Result<Matrix> {
    let (m, n) = x.shape();
    let mut out = Matrix::zeros(m, n);
    for j in 0..n {
        let prob = RegressionProblem::new(x.column(j), a.clone(), None)?;
        let est = robust_gls(&prob, spec, 1e-12, 10_000)?;
        out.set_column(j, &est.weights);
    }
    Ok(out)
}

/// Row counterpart of [`column_fit_weights`]: rows of `x` on the factor `b`.
pub fn row_fit_weights(x: &Matrix, b: &Matrix, spec: &WeightSpec) -> Result<Matrix> {
    Ok(column_fit_weights(&x.transpose(), b, spec)?.transpose())
}
