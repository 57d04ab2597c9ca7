//! The weight family `w(u) = (1 + |u|^q)^(-1/q)` and its calibration.
//!
//! A [`WeightSpec`] bundles the power `q` with the tuning constant `k1`, the
//! Gaussian consistency factor `k2` and their product `k3`. Estimators read
//! all robustness settings from it.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quadrature::integrate_pieces;

/// Absolute tolerance of the Gaussian integrals.
const INTEGRAL_TOLERANCE: f64 = 1e-12;
/// Upper integration limit; the Gaussian tail beyond it is negligible.
const INTEGRATION_LIMIT: f64 = 40.0;
const K1_BRACKET: (f64, f64) = (1e-4, 1e4);
const TARGET_TOLERANCE: f64 = 1e-8;

/// Admissible weight powers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Power {
    One,
    Two,
    Four,
    Eight,
    Infinite,
}

impl Power {
    pub const ALL: [Power; 5] = [
        Power::One,
        Power::Two,
        Power::Four,
        Power::Eight,
        Power::Infinite,
    ];

    /// The exponent, or `None` for the limiting case `min(1, 1/|u|)`.
    pub fn exponent(self) -> Option<f64> {
        match self {
            Power::One => Some(1.0),
            Power::Two => Some(2.0),
            Power::Four => Some(4.0),
            Power::Eight => Some(8.0),
            Power::Infinite => None,
        }
    }
}

impl fmt::Display for Power {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exponent() {
            Some(q) => write!(f, "{q}"),
            None => f.write_str("inf"),
        }
    }
}

impl FromStr for Power {
    type Err = Error;

    fn from_str(s: &str) -> Result<Power> {
        match s.trim() {
            "1" => Ok(Power::One),
            "2" => Ok(Power::Two),
            "4" => Ok(Power::Four),
            "8" => Ok(Power::Eight),
            "inf" | "Inf" | "infinity" | "∞" => Ok(Power::Infinite),
            other => Err(Error::InvalidArgument(format!(
                "weight power must be one of 1, 2, 4, 8, inf; got {other:?}"
            ))),
        }
    }
}

/// A tuning constant that may be infinite, meaning "no down-weighting".
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TuningConstant {
    Finite(f64),
    Infinite,
}

impl TuningConstant {
    /// The value as a float, `f64::INFINITY` for the infinite case.
    pub fn value(self) -> f64 {
        match self {
            TuningConstant::Finite(v) => v,
            TuningConstant::Infinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, TuningConstant::Finite(_))
    }
}

impl fmt::Display for TuningConstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TuningConstant::Finite(v) => write!(f, "{v}"),
            TuningConstant::Infinite => f.write_str("inf"),
        }
    }
}

/// Evaluates the weight function at standardized residual `u`.
///
/// For `|u| > 1` the value is computed as `(1/|u|) (1 + |u|^-q)^(-1/q)`,
/// which stays accurate when `|u|^q` would overflow.
///
/// ```
/// use tsvd_core::weights::{weight, Power};
///
/// assert_eq!(weight(0.0, Power::Four), 1.0);
/// assert!((weight(1.0, Power::Four) - 2f64.powf(-0.25)).abs() < 1e-15);
/// assert_eq!(weight(2.0, Power::Infinite), 0.5);
/// ```
pub fn weight(u: f64, q: Power) -> f64 {
    let a = u.abs();
    if a <= 1.0 {
        inverse_root(1.0 + power_of(a, q), q)
    } else {
        inverse_root(1.0 + power_of(a.recip(), q), q) / a
    }
}

/// `t^q`, zero for the limiting power when `t <= 1`.
fn power_of(t: f64, q: Power) -> f64 {
    match q {
        Power::One => t,
        Power::Two => t * t,
        Power::Four => (t * t) * (t * t),
        Power::Eight => {
            let t4 = (t * t) * (t * t);
            t4 * t4
        }
        Power::Infinite => 0.0,
    }
}

/// `v^(-1/q)`; the powers are chains of square roots.
fn inverse_root(v: f64, q: Power) -> f64 {
    match q {
        Power::One => v.recip(),
        Power::Two => v.sqrt().recip(),
        Power::Four => v.sqrt().sqrt().recip(),
        Power::Eight => v.sqrt().sqrt().sqrt().recip(),
        Power::Infinite => 1.0,
    }
}

/// Robustness configuration shared by every estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightSpec {
    q: Power,
    k1: TuningConstant,
    k2: f64,
    k3: TuningConstant,
}

impl WeightSpec {
    /// Unit weights everywhere: the least-squares estimators.
    pub fn least_squares() -> WeightSpec {
        WeightSpec {
            q: Power::Four,
            k1: TuningConstant::Infinite,
            k2: 1.0,
            k3: TuningConstant::Infinite,
        }
    }

    /// A spec with explicitly given constants; `k3` is set to `k1 * k2`.
    pub fn new(q: Power, k1: f64, k2: f64) -> Result<WeightSpec> {
        if k1 == f64::INFINITY {
            return Ok(WeightSpec {
                q,
                ..WeightSpec::least_squares()
            });
        }
        if !(k1.is_finite() && k1 > 0.0) {
            return Err(Error::InvalidArgument(format!("k1 must be positive, got {k1}")));
        }
        if !(k2.is_finite() && k2 >= 1.0) {
            return Err(Error::InvalidArgument(format!("k2 must be at least 1, got {k2}")));
        }
        Ok(WeightSpec {
            q,
            k1: TuningConstant::Finite(k1),
            k2,
            k3: TuningConstant::Finite(k1 * k2),
        })
    }

    /// A spec for tuning constant `k1`, with `k2` from the Gaussian integrals.
    pub fn from_k1(q: Power, k1: f64) -> Result<WeightSpec> {
        let k2 = correction_k2(TuningConstant::Finite(k1), q)?;
        WeightSpec::new(q, k1, k2)
    }

    pub fn q(&self) -> Power {
        self.q
    }

    pub fn k1(&self) -> TuningConstant {
        self.k1
    }

    pub fn k2(&self) -> f64 {
        self.k2
    }

    pub fn k3(&self) -> TuningConstant {
        self.k3
    }

    pub fn is_robust(&self) -> bool {
        self.k1.is_finite()
    }

    /// Weight of a deviation from the location, `u = deviation / (k1 scale)`.
    pub fn location_weight(&self, deviation: f64, scale: f64) -> f64 {
        match self.k1 {
            TuningConstant::Infinite => 1.0,
            TuningConstant::Finite(k1) => weight(deviation / (k1 * scale), self.q),
        }
    }

    /// Weight of a regression residual, `u = residual / (k3 scale)`.
    pub fn residual_weight(&self, residual: f64, scale: f64) -> f64 {
        match self.k3 {
            TuningConstant::Infinite => 1.0,
            TuningConstant::Finite(k3) => weight(residual / (k3 * scale), self.q),
        }
    }
}

impl fmt::Display for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "q={} k1={} k2={} k3={}",
            self.q, self.k1, self.k2, self.k3
        )
    }
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `integral over the positive half-line of g(x) w(x/k1)^power phi(x)`.
fn half_line_moment(k1: f64, q: Power, power: i32, g: impl Fn(f64) -> f64) -> Result<f64> {
    let f = |x: f64| g(x) * weight(x / k1, q).powi(power) * std_normal_pdf(x);
    let mut points = vec![0.0];
    for p in [k1, 10.0 * k1] {
        if p < INTEGRATION_LIMIT {
            points.push(p);
        }
    }
    points.push(INTEGRATION_LIMIT);
    integrate_pieces(&f, &points, INTEGRAL_TOLERANCE)
}

/// Gaussian consistency factor: `k2^2 = E[w^2] / E[w^2 x^2]` with `u = x/k1`.
///
/// ```
/// use tsvd_core::weights::{correction_k2, Power, TuningConstant};
///
/// assert_eq!(correction_k2(TuningConstant::Infinite, Power::Four).unwrap(), 1.0);
/// let k2 = correction_k2(TuningConstant::Finite(0.5), Power::Four).unwrap();
/// assert!(k2 > 1.0);
/// ```
pub fn correction_k2(k1: TuningConstant, q: Power) -> Result<f64> {
    let k1 = match k1 {
        TuningConstant::Infinite => return Ok(1.0),
        TuningConstant::Finite(v) => v,
    };
    if !(k1 > 0.0 && k1.is_finite()) {
        return Err(Error::InvalidArgument(format!("k1 must be positive, got {k1}")));
    }
    let mass = half_line_moment(k1, q, 2, |_| 1.0)?;
    let second = half_line_moment(k1, q, 2, |x| x * x)?;
    Ok((mass / second).sqrt())
}

/// Asymptotic efficacy `(E w)^2 / E[w^2]` at the standard Gaussian.
pub fn efficacy(k1: TuningConstant, q: Power) -> Result<f64> {
    let k1 = match k1 {
        TuningConstant::Infinite => return Ok(1.0),
        TuningConstant::Finite(v) => v,
    };
    if !(k1 > 0.0 && k1.is_finite()) {
        return Err(Error::InvalidArgument(format!("k1 must be positive, got {k1}")));
    }
    // The half-line integrals double to full-line ones; the factors cancel
    // except for one 2 in the numerator.
    let first = half_line_moment(k1, q, 1, |_| 1.0)?;
    let second = half_line_moment(k1, q, 2, |_| 1.0)?;
    Ok(2.0 * first * first / second)
}

/// What [`calibrate`] solves for.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CalibrationTarget {
    Efficacy(f64),
    K3(f64),
}

/// Finds the tuning constant that hits `target`, by bisection in `ln k1`.
///
/// ```
/// use tsvd_core::weights::{calibrate, efficacy, CalibrationTarget, Power};
///
/// let spec = calibrate(CalibrationTarget::Efficacy(0.9), Power::Four).unwrap();
/// let e = efficacy(spec.k1(), Power::Four).unwrap();
/// assert!((e - 0.9).abs() < 1e-6);
/// ```
pub fn calibrate(target: CalibrationTarget, q: Power) -> Result<WeightSpec> {
    let objective: Box<dyn Fn(f64) -> Result<f64>> = match target {
        CalibrationTarget::Efficacy(e) => {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "efficacy must lie in (0, 1], got {e}"
                )));
            }
            if e == 1.0 {
                return Ok(WeightSpec {
                    q,
                    ..WeightSpec::least_squares()
                });
            }
            Box::new(move |k1| efficacy(TuningConstant::Finite(k1), q))
        }
        CalibrationTarget::K3(v) => {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument(format!("k3 must be positive, got {v}")));
            }
            if v == f64::INFINITY {
                return Ok(WeightSpec {
                    q,
                    ..WeightSpec::least_squares()
                });
            }
            Box::new(move |k1| Ok(k1 * correction_k2(TuningConstant::Finite(k1), q)?))
        }
    };
    let goal = match target {
        CalibrationTarget::Efficacy(e) => e,
        CalibrationTarget::K3(v) => v,
    };

    // Both objectives increase with k1.
    let (mut lo, mut hi) = (K1_BRACKET.0.ln(), K1_BRACKET.1.ln());
    let (f_lo, f_hi) = (objective(lo.exp())?, objective(hi.exp())?);
    if !(f_lo <= goal && goal <= f_hi) {
        return Err(Error::TargetUnreachable {
            target: goal,
            low: f_lo,
            high: f_hi,
        });
    }
    let mut k1 = lo.exp();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        k1 = mid.exp();
        let f = objective(k1)?;
        if (f - goal).abs() < TARGET_TOLERANCE * 1e-2 || hi - lo < 1e-15 {
            break;
        }
        if f < goal {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    WeightSpec::from_k1(q, k1)
}

/// Rational approximation of `k2` as a function of `k3` for `q = 4`.
///
/// ```
/// use tsvd_core::weights::k2_of_k3_approx;
///
/// let k2 = k2_of_k3_approx(1.0).unwrap();
/// assert!((k2 - 0.4762f64.exp()).abs() < 1e-12);
/// ```
pub fn k2_of_k3_approx(k3: f64) -> Result<f64> {
    if !(k3 > 0.0 && k3.is_finite()) {
        return Err(Error::InvalidArgument(format!("k3 must be positive, got {k3}")));
    }
    let l = k3.ln();
    let denominator = 1.0 - 0.3425 * l;
    if denominator.abs() < 1e-12 {
        return Err(Error::PoleAtDenominatorZero { k3 });
    }
    Ok(((0.4762 - 0.8465 * l + 0.4554 * l * l) / denominator).exp())
}

/// One row of the calibration table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationRow {
    pub efficacy: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// Breakdown fraction at offset threshold 1.
    pub bp1: f64,
    pub b_n: f64,
    pub b_s: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        assert_eq!(weight(0.0, Power::Four), 1.0);
        assert!((weight(1.0, Power::Four) - 0.840_896_415_253_714_5).abs() < 1e-15);
        assert_eq!(weight(2.0, Power::Infinite), 0.5);
        assert_eq!(weight(-2.0, Power::Infinite), 0.5);
        assert_eq!(weight(0.5, Power::Infinite), 1.0);
    }

    #[test]
    fn weight_stays_positive_for_huge_residuals() {
        for q in Power::ALL {
            let w = weight(1e200, q);
            assert!(w > 0.0);
            assert!((w * 1e200 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_is_continuous_at_one() {
        for q in [Power::One, Power::Two, Power::Four, Power::Eight] {
            let below = weight(1.0 - 1e-12, q);
            let above = weight(1.0 + 1e-12, q);
            assert!((below - above).abs() < 1e-11);
        }
    }

    #[test]
    fn power_parse_round_trip() {
        for q in Power::ALL {
            assert_eq!(q.to_string().parse::<Power>().unwrap(), q);
        }
        assert!("3".parse::<Power>().is_err());
    }

    #[test]
    fn least_squares_limits() {
        assert_eq!(correction_k2(TuningConstant::Infinite, Power::Four).unwrap(), 1.0);
        assert_eq!(efficacy(TuningConstant::Infinite, Power::Two).unwrap(), 1.0);
        let spec = calibrate(CalibrationTarget::Efficacy(1.0), Power::Eight).unwrap();
        assert!(!spec.is_robust());
        assert_eq!(spec.k2(), 1.0);
    }

    #[test]
    fn q_infinite_k2_matches_closed_form() {
        // With w = min(1, k1/|x|) and k1 = 1, integration by parts gives
        // E[w^2] = P(|x|<1) + 2 phi(1) - P(|x|>1) and
        // E[w^2 x^2] = P(|x|<1) - 2 phi(1) + P(|x|>1).
        let k2 = correction_k2(TuningConstant::Finite(1.0), Power::Infinite).unwrap();
        let p_in = 0.682_689_492_137_085_9;
        let two_phi1 = 2.0 * std_normal_pdf(1.0);
        let second_in = p_in - two_phi1;
        let p_out = 1.0 - p_in;
        let inv_sq_out = two_phi1 - p_out;
        let expected = ((p_in + inv_sq_out) / (second_in + p_out)).sqrt();
        assert!((k2 - expected).abs() < 1e-10, "{k2} vs {expected}");
    }

    #[test]
    fn spec_caches_product() {
        let spec = WeightSpec::new(Power::Four, 0.5, 1.7).unwrap();
        assert_eq!(spec.k3(), TuningConstant::Finite(0.5 * 1.7));
        assert!(WeightSpec::new(Power::Four, -1.0, 1.7).is_err());
        assert!(WeightSpec::new(Power::Four, 1.0, 0.9).is_err());
    }

    #[test]
    fn calibrate_by_k3() {
        let spec = calibrate(CalibrationTarget::K3(1.0), Power::Four).unwrap();
        assert!((spec.k3().value() - 1.0).abs() < 1e-8);
        assert!(spec.k2() > 1.5 && spec.k2() < 1.7);
    }

    #[test]
    fn calibrate_rejects_bad_targets() {
        assert!(calibrate(CalibrationTarget::Efficacy(1.2), Power::Four).is_err());
        assert!(calibrate(CalibrationTarget::Efficacy(0.0), Power::Four).is_err());
        assert!(matches!(
            calibrate(CalibrationTarget::K3(1e9), Power::Four),
            Err(Error::TargetUnreachable { .. })
        ));
    }

    #[test]
    fn note_approximation_examples() {
        assert!((k2_of_k3_approx(0.5).unwrap() - 2.817).abs() < 0.002);
        assert!((k2_of_k3_approx(2.0).unwrap() - 1.153).abs() < 0.002);
        let pole = (1.0 / 0.3425f64).exp();
        assert!(matches!(
            k2_of_k3_approx(pole),
            Err(Error::PoleAtDenominatorZero { .. })
        ));
    }
}
