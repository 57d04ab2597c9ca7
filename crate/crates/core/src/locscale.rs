//! Weighted location and scale by fixed-point iteration, and the
//! experiments built on it: breakdown under point contamination, linear
//! convergence rates, and extrapolation of finite-sample results.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
pub use crate::fixed_point::FixedPointOptions;
use crate::fixed_point::aitken;
use crate::weights::{efficacy, CalibrationRow, WeightSpec};

/// Sample sizes used for extrapolation to infinite samples.
pub const DEFAULT_SIZES: [usize; 3] = [100, 300, 900];

/// Where contaminating points are placed in the breakdown experiment.
pub const CONTAMINATION_SITE: f64 = 1e6;

/// Consistency constant turning a median absolute deviation into a Gaussian sd.
const MAD_SCALE: f64 = 1.4826;

#[derive(Clone, Debug, PartialEq)]
pub struct LocationScaleEstimate {
    /// Location.
    pub n: f64,
    /// Scatter.
    pub s_x: f64,
    /// Unbiased variance estimate `N/(N-1) s_x^2`.
    pub sigma2_hat: f64,
    pub weights: Vec<f64>,
    /// Effective sample size `(sum w)^2 / sum w^2`.
    pub n_eff: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `m` points at the Gaussian quantiles `(i - 1/2) / m`, ascending.
///
/// ```
/// use tsvd_core::locscale::gaussian_quantile_sample;
///
/// assert_eq!(gaussian_quantile_sample(1), vec![0.0]);
/// let xs = gaussian_quantile_sample(2);
/// assert!((xs[1] - 0.674_489_750_196_081_7).abs() < 1e-12);
/// assert_eq!(xs[0], -xs[1]);
/// ```
pub fn gaussian_quantile_sample(m: usize) -> Vec<f64> {
    let normal = Normal::standard();
    let mut xs = vec![0.0; m];
    // Fill the lower half and mirror it so the sample is exactly antisymmetric.
    for i in 0..m / 2 {
        let x = normal.inverse_cdf((i as f64 + 0.5) / m as f64);
        xs[i] = x;
        xs[m - 1 - i] = -x;
    }
    xs
}

/// Median of `xs` where point `i` counts `mult[i]` times.
fn weighted_median(xs: &[f64], mult: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let half = 0.5 * mult.iter().sum::<f64>();
    let mut cumulative = 0.0;
    for (pos, &i) in order.iter().enumerate() {
        cumulative += mult[i];
        if cumulative > half {
            return xs[i];
        }
        if cumulative == half {
            let next = order[(pos + 1).min(order.len() - 1)];
            return 0.5 * (xs[i] + xs[next]);
        }
    }
    xs[order[order.len() - 1]]
}

/// Median and scaled MAD, falling back to mean and sd when the MAD is zero.
pub fn initial_guess(xs: &[f64], mult: &[f64]) -> Result<(f64, f64)> {
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    if hi == lo {
        return Err(Error::Degenerate { location: lo });
    }
    let median = weighted_median(xs, mult);
    let deviations: Vec<f64> = xs.iter().map(|x| (x - median).abs()).collect();
    let mad = MAD_SCALE * weighted_median(&deviations, mult);
    if mad > 0.0 {
        return Ok((median, mad));
    }
    let total: f64 = mult.iter().sum();
    let mean = xs.iter().zip(mult).map(|(x, c)| c * x).sum::<f64>() / total;
    let var = xs
        .iter()
        .zip(mult)
        .map(|(x, c)| c * (x - mean).powi(2))
        .sum::<f64>()
        / total;
    Ok((mean, var.sqrt()))
}

/// One application of the weighted location-scale map.
///
/// Weights are evaluated at `(n, s)`; the new location is their weighted
/// mean, and the new scale uses squared weights around the new location.
pub fn update(xs: &[f64], mult: &[f64], spec: &WeightSpec, n: f64, s: f64) -> (f64, f64) {
    let mut sw = 0.0;
    let mut swx = 0.0;
    let weights: Vec<f64> = xs.iter().map(|&x| spec.location_weight(x - n, s)).collect();
    for ((&x, &c), &w) in xs.iter().zip(mult).zip(&weights) {
        sw += c * w;
        swx += c * w * x;
    }
    let n_new = swx / sw;
    let mut sw2 = 0.0;
    let mut sw2r2 = 0.0;
    for ((&x, &c), &w) in xs.iter().zip(mult).zip(&weights) {
        let w2 = c * w * w;
        sw2 += w2;
        sw2r2 += w2 * (x - n_new) * (x - n_new);
    }
    (n_new, spec.k2() * (sw2r2 / sw2).sqrt())
}

/// Weighted location and scale of `xs`.
///
/// ```
/// use tsvd_core::locscale::estimate;
/// use tsvd_core::weights::WeightSpec;
///
/// let est = estimate(&[-1.0, 1.0], &WeightSpec::least_squares(), 1e-10, 500).unwrap();
/// assert_eq!(est.n, 0.0);
/// assert!((est.s_x - 1.0).abs() < 1e-12);
/// ```
pub fn estimate(
    xs: &[f64],
    spec: &WeightSpec,
    tol: f64,
    max_iter: usize,
) -> Result<LocationScaleEstimate> {
    let opts = FixedPointOptions {
        tol,
        max_iter,
        ..FixedPointOptions::default()
    };
    estimate_with(xs, None, spec, &opts)
}

/// [`estimate`] with per-point multiplicities and explicit options.
///
/// A multiplicity acts as a frequency weight, so it may be fractional.
pub fn estimate_with(
    xs: &[f64],
    multiplicity: Option<&[f64]>,
    spec: &WeightSpec,
    opts: &FixedPointOptions,
) -> Result<LocationScaleEstimate> {
    if xs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two observations, got {}",
            xs.len()
        )));
    }
    if let Some(i) = xs.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { row: i, col: 0 });
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let ones;
    let mult = match multiplicity {
        Some(c) => {
            if c.len() != xs.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} multiplicities for {} observations",
                    c.len(),
                    xs.len()
                )));
            }
            if c.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidArgument("multiplicities must be finite and non-negative".into()));
            }
            c
        }
        None => {
            ones = vec![1.0; xs.len()];
            &ones[..]
        }
    };

    let (mut n, mut s) = initial_guess(xs, mult)?;
    let mut previous: Option<[f64; 2]> = None;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let (n1, s1) = update(xs, mult, spec, n, s);
        if !(s1 > 0.0 && s1.is_finite() && n1.is_finite()) {
            return Err(Error::Degenerate { location: n });
        }
        let change = ((n1 - n).abs()).max((s1 - s).abs()) / s1;
        if change < opts.tol {
            n = n1;
            s = s1;
            converged = true;
            break;
        }
        if opts.accelerate && iterations % 3 == 0 {
            if let Some(p) = previous {
                if let Some(acc) = aitken(&p, &[n, s], &[n1, s1]) {
                    if acc[1] > 0.0 {
                        n = acc[0];
                        s = acc[1];
                        previous = None;
                        continue;
                    }
                }
            }
        }
        previous = Some([n, s]);
        n = n1;
        s = s1;
    }

    let weights: Vec<f64> = xs.iter().map(|&x| spec.location_weight(x - n, s)).collect();
    let sw: f64 = weights.iter().zip(mult).map(|(w, c)| c * w).sum();
    let sw2: f64 = weights.iter().zip(mult).map(|(w, c)| c * w * w).sum();
    let n_eff = sw * sw / sw2;
    let est = LocationScaleEstimate {
        n,
        s_x: s,
        sigma2_hat: n_eff / (n_eff - 1.0) * s * s,
        weights,
        n_eff,
        iterations,
        converged,
    };
    if converged {
        Ok(est)
    } else {
        Err(Error::LocScaleMaxIter {
            iterations,
            last: Box::new(est),
        })
    }
}

/// Result of the contamination experiment at one sample size.
#[derive(Clone, Debug, PartialEq)]
pub struct BreakdownResult {
    /// `k* / (m + k*)`.
    pub bp: f64,
    /// Contamination count at which the offset reaches the threshold.
    pub k_star: f64,
    /// Every evaluated `(k, offset)` pair, sorted by `k`.
    pub offsets: Vec<(f64, f64)>,
}

/// Location offset after adding `k` points at [`CONTAMINATION_SITE`].
///
/// The contaminating points are one observation with multiplicity `k`, so
/// fractional `k` is meaningful. A run that collapses or fails to settle is
/// scored by its last location.
pub fn contamination_offset(clean: &[f64], k: f64, spec: &WeightSpec) -> f64 {
    let mut xs = clean.to_vec();
    let mut mult = vec![1.0; clean.len()];
    xs.push(CONTAMINATION_SITE);
    mult.push(k.max(0.0));
    let opts = FixedPointOptions {
        tol: 1e-12,
        max_iter: 20_000,
        accelerate: true,
    };
    let location = match estimate_with(&xs, Some(&mult), spec, &opts) {
        Ok(e) => e.n,
        Err(Error::LocScaleMaxIter { last, .. }) => last.n,
        Err(Error::Degenerate { location }) => location,
        Err(_) => CONTAMINATION_SITE,
    };
    if location.is_finite() {
        location.abs()
    } else {
        CONTAMINATION_SITE
    }
}

/// Smallest contamination fraction that drags the location past `a`.
///
/// The integer count is bracketed by bisection on `0..=m`; the crossing is
/// then located by bisection on the fractional multiplicity.
pub fn breakdown_point(spec: &WeightSpec, m: usize, a: f64) -> Result<BreakdownResult> {
    if m < 10 {
        return Err(Error::InvalidArgument(format!("sample size must be at least 10, got {m}")));
    }
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {a}")));
    }
    let clean = gaussian_quantile_sample(m);
    let mut offsets = Vec::new();
    let mut offset_at = |k: f64| {
        let v = contamination_offset(&clean, k, spec);
        offsets.push((k, v));
        v
    };

    let top = offset_at(m as f64);
    if top < a {
        return Err(Error::NeverBreaks {
            offset: top,
            threshold: a,
        });
    }
    let (mut lo, mut hi) = (0usize, m);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if offset_at(mid as f64) >= a {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (mut lo, mut hi) = (lo as f64, hi as f64);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if offset_at(mid) >= a {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let k_star = 0.5 * (lo + hi);
    offsets.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(BreakdownResult {
        bp: k_star / (m as f64 + k_star),
        k_star,
        offsets,
    })
}

/// Linear convergence factors of the unaccelerated map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRates {
    pub b_n: f64,
    pub b_s: f64,
}

const RATE_WINDOW: usize = 10;
const RATE_FLOOR: f64 = 1e-11;
const RATE_MAX_STEPS: usize = 5000;

/// Measures `b_n` and `b_s` on the `m`-point Gaussian quantile sample.
///
/// Location and scale are perturbed separately from the fixed point
/// (`n + s/2` with `s` fixed, then `1.5 s` with `n` fixed) and the error
/// ratios of the plain iteration are averaged geometrically over the last
/// ten steps before the error drops below `1e-11`.
pub fn convergence_rates(spec: &WeightSpec, m: usize) -> Result<ConvergenceRates> {
    if m < 100 {
        return Err(Error::InvalidArgument(format!("sample size must be at least 100, got {m}")));
    }
    if !spec.is_robust() {
        return Ok(ConvergenceRates { b_n: 0.0, b_s: 0.0 });
    }
    let xs = gaussian_quantile_sample(m);
    let mult = vec![1.0; m];
    let opts = FixedPointOptions {
        tol: 1e-15,
        max_iter: 10_000,
        accelerate: true,
    };
    let fixed = match estimate_with(&xs, None, spec, &opts) {
        Ok(e) => e,
        // A tolerance this tight can stall on rounding; the last iterate is
        // as good as the arithmetic allows.
        Err(Error::LocScaleMaxIter { last, .. }) => *last,
        Err(e) => return Err(e),
    };
    let (n_inf, s_inf) = (fixed.n, fixed.s_x);

    let ratio_of = |start: (f64, f64), pick: fn((f64, f64)) -> f64, target: f64| {
        let (mut n, mut s) = start;
        let mut errors = vec![(pick((n, s)) - target).abs()];
        for _ in 0..RATE_MAX_STEPS {
            (n, s) = update(&xs, &mult, spec, n, s);
            let e = (pick((n, s)) - target).abs();
            if e < RATE_FLOOR {
                break;
            }
            errors.push(e);
        }
        let ratios: Vec<f64> = errors.windows(2).map(|w| w[1] / w[0]).collect();
        let window = &ratios[ratios.len().saturating_sub(RATE_WINDOW)..];
        if window.is_empty() {
            return Ok(0.0);
        }
        let mean_log = window.iter().map(|r| r.ln()).sum::<f64>() / window.len() as f64;
        let rate = mean_log.exp();
        let (lo, hi) = window
            .iter()
            .fold((f64::INFINITY, 0.0_f64), |(l, h), &r| (l.min(r), h.max(r)));
        if hi - lo > 0.1 * rate {
            return Err(Error::RateUnstable {
                mean: rate,
                spread: hi - lo,
            });
        }
        Ok(rate)
    };

    let b_n = ratio_of((n_inf + 0.5 * s_inf, s_inf), |(n, _)| n, n_inf)?;
    let b_s = ratio_of((n_inf, 1.5 * s_inf), |(_, s)| s, s_inf)?;
    Ok(ConvergenceRates { b_n, b_s })
}

/// The curve `t(m) = t_inf + t1 / (m + t2)` through three points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymptoteFit {
    pub t_inf: f64,
    pub t1: f64,
    pub t2: f64,
}

impl AsymptoteFit {
    pub fn eval(&self, m: f64) -> f64 {
        if self.t1 == 0.0 {
            self.t_inf
        } else {
            self.t_inf + self.t1 / (m + self.t2)
        }
    }
}

/// Fits `t(m) = t_inf + t1 / (m + t2)` exactly through three `(m, t)` points.
///
/// ```
/// use tsvd_core::locscale::extrapolate;
///
/// let f = |m: f64| 1.0 + 10.0 / (m + 5.0);
/// let fit = extrapolate([(100.0, f(100.0)), (300.0, f(300.0)), (900.0, f(900.0))]).unwrap();
/// assert!((fit.t_inf - 1.0).abs() < 1e-9);
/// ```
pub fn extrapolate(points: [(f64, f64); 3]) -> Result<AsymptoteFit> {
    let mut pts = points;
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let [(m1, t1), (m2, t2), (m3, t3)] = pts;
    if !(m1 < m2 && m2 < m3) || pts.iter().any(|(m, t)| !m.is_finite() || !t.is_finite()) {
        return Err(Error::InvalidArgument("need three distinct finite sample sizes".into()));
    }
    let scale = t1.abs().max(t2.abs()).max(t3.abs()).max(f64::MIN_POSITIVE);
    let (d12, d23) = (t1 - t2, t2 - t3);
    if d12.abs() <= 4.0 * f64::EPSILON * scale && d23.abs() <= 4.0 * f64::EPSILON * scale {
        return Ok(AsymptoteFit {
            t_inf: t2,
            t1: 0.0,
            t2: 0.0,
        });
    }
    if !(d12 * d23 > 0.0) {
        return Err(Error::SingularFit);
    }
    // (t1 - t2) / (t2 - t3) = (m2 - m1)(m3 + c) / ((m3 - m2)(m1 + c))
    let r = d12 / d23;
    let denominator = r * (m3 - m2) - (m2 - m1);
    if denominator == 0.0 {
        return Err(Error::SingularFit);
    }
    let c = ((m2 - m1) * m3 - r * (m3 - m2) * m1) / denominator;
    let gap = 1.0 / (m1 + c) - 1.0 / (m2 + c);
    let b = d12 / gap;
    let t_inf = t1 - b / (m1 + c);
    if !(t_inf.is_finite() && b.is_finite() && c.is_finite()) || gap == 0.0 {
        return Err(Error::SingularFit);
    }
    Ok(AsymptoteFit { t_inf, t1: b, t2: c })
}

/// Extrapolated value, or the value at the largest size when the fit is singular.
pub fn extrapolate_or_last(points: [(f64, f64); 3]) -> f64 {
    match extrapolate(points) {
        Ok(fit) => fit.t_inf,
        Err(_) => {
            points
                .iter()
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .map(|p| p.1)
                .unwrap_or(f64::NAN)
        }
    }
}

fn size_points(sizes: [usize; 3], values: &[f64]) -> [(f64, f64); 3] {
    [
        (sizes[0] as f64, values[0]),
        (sizes[1] as f64, values[1]),
        (sizes[2] as f64, values[2]),
    ]
}

/// Breakdown fractions at the three sizes, run in parallel.
pub fn breakdown_by_size(spec: &WeightSpec, sizes: [usize; 3], a: f64) -> Result<[f64; 3]> {
    let bps: Vec<f64> = sizes
        .par_iter()
        .map(|&m| breakdown_point(spec, m, a).map(|r| r.bp))
        .collect::<Result<_>>()?;
    Ok([bps[0], bps[1], bps[2]])
}

/// Breakdown fraction extrapolated to infinite sample size.
pub fn extrapolated_breakdown(spec: &WeightSpec, sizes: [usize; 3], a: f64) -> Result<AsymptoteFit> {
    let bps = breakdown_by_size(spec, sizes, a)?;
    extrapolate(size_points(sizes, &bps))
}

/// Convergence rates at the three sizes, run in parallel.
pub fn rates_by_size(spec: &WeightSpec, sizes: [usize; 3]) -> Result<[ConvergenceRates; 3]> {
    let rates: Vec<ConvergenceRates> = sizes
        .par_iter()
        .map(|&m| convergence_rates(spec, m))
        .collect::<Result<_>>()?;
    Ok([rates[0], rates[1], rates[2]])
}

/// A full calibration-table row: constants, breakdown at `a = 1` and rates,
/// each extrapolated over `sizes`.
pub fn calibration_row(spec: &WeightSpec, sizes: [usize; 3]) -> Result<CalibrationRow> {
    let bps = breakdown_by_size(spec, sizes, 1.0)?;
    let rates = rates_by_size(spec, sizes)?;
    let b_n: Vec<f64> = rates.iter().map(|r| r.b_n).collect();
    let b_s: Vec<f64> = rates.iter().map(|r| r.b_s).collect();
    Ok(CalibrationRow {
        efficacy: efficacy(spec.k1(), spec.q())?,
        k1: spec.k1().value(),
        k2: spec.k2(),
        k3: spec.k3().value(),
        bp1: extrapolate_or_last(size_points(sizes, &bps)),
        b_n: extrapolate_or_last(size_points(sizes, &b_n)),
        b_s: extrapolate_or_last(size_points(sizes, &b_s)),
    })
}
