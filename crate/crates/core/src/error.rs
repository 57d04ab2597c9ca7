use thiserror::Error;

use crate::locscale::LocationScaleEstimate;
use crate::regress::RegressionEstimate;
use crate::tsvd::TsvdState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the numerical layer can report.
///
/// Variants that abort an iteration carry the last iterate where one exists,
/// so callers can still inspect how far the computation got.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("column {column} is numerically dependent on the previous columns")]
    RankDeficient { column: usize },

    #[error("Jacobi SVD did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("adaptive quadrature did not reach tolerance {tolerance:e} (estimated error {error:e})")]
    QuadratureFailure { tolerance: f64, error: f64 },

    #[error("calibration target {target} is outside the reachable range [{low}, {high}]")]
    TargetUnreachable { target: f64, low: f64, high: f64 },

    #[error("rational approximation has a pole at k3 = {k3}")]
    PoleAtDenominatorZero { k3: f64 },

    #[error("zero scatter: every observation equals {location}")]
    Degenerate { location: f64 },

    #[error("location-scale iteration did not converge in {iterations} steps")]
    LocScaleMaxIter {
        iterations: usize,
        last: Box<LocationScaleEstimate>,
    },

    #[error("regression iteration did not converge in {iterations} steps")]
    RegressionMaxIter {
        iterations: usize,
        last: Box<RegressionEstimate>,
    },

    #[error("iteration did not converge in {iterations} steps")]
    MaxIterExceeded { iterations: usize },

    #[error("estimator never breaks down: offset {offset} < {threshold} at k = m")]
    NeverBreaks { offset: f64, threshold: f64 },

    #[error("convergence-rate ratios are unstable (mean {mean}, spread {spread})")]
    RateUnstable { mean: f64, spread: f64 },

    #[error("asymptote fit is singular for the given points")]
    SingularFit,

    #[error("normal matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    SingularNormalMatrix { condition: f64 },

    #[error("effective sample size {n_eff} does not exceed the parameter count {params}")]
    DegenerateDoF { n_eff: f64, params: f64 },

    #[error("normal system for column {0} is singular")]
    SingularColumnSystem(usize),

    #[error("normal system for row {0} is singular")]
    SingularRowSystem(usize),

    #[error("effective entry count {n_eff} does not exceed the degrees of freedom {nu}")]
    DoFExhausted { n_eff: f64, nu: f64 },

    #[error("continuation stalled at t = {t} (last converged t = {last_good})")]
    ContinuationStall {
        t: f64,
        last_good: f64,
        state: Box<TsvdState>,
    },
}

impl Error {
    /// Whether the failure is an iteration budget running out, as opposed to
    /// a numerical or input problem.
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::LocScaleMaxIter { .. }
                | Error::RegressionMaxIter { .. }
                | Error::MaxIterExceeded { .. }
                | Error::RateUnstable { .. }
                | Error::ContinuationStall { .. }
        )
    }

    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_) | Error::NonFinite { .. } | Error::DimensionMismatch(_)
        )
    }

    /// Short variant name, used for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::NonFinite { .. } => "NonFinite",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::QuadratureFailure { .. } => "QuadratureFailure",
            Error::TargetUnreachable { .. } => "TargetUnreachable",
            Error::PoleAtDenominatorZero { .. } => "PoleAtDenominatorZero",
            Error::Degenerate { .. } => "Degenerate",
            Error::LocScaleMaxIter { .. } => "MaxIterExceeded",
            Error::RegressionMaxIter { .. } => "MaxIterExceeded",
            Error::MaxIterExceeded { .. } => "MaxIterExceeded",
            Error::NeverBreaks { .. } => "NeverBreaks",
            Error::RateUnstable { .. } => "RateUnstable",
            Error::SingularFit => "SingularFit",
            Error::SingularNormalMatrix { .. } => "SingularNormalMatrix",
            Error::DegenerateDoF { .. } => "DegenerateDoF",
            Error::SingularColumnSystem(_) => "SingularColumnSystem",
            Error::SingularRowSystem(_) => "SingularRowSystem",
            Error::DoFExhausted { .. } => "DoFExhausted",
            Error::ContinuationStall { .. } => "ContinuationStall",
        }
    }
}
