//! Robust weighted estimation: location and scale, regression with noisy
//! regressors, and low-rank matrix approximation that accounts for the
//! uncertainty of its own factors.
//!
//! The modules build on each other:
//!
//! * [`matrix`]: dense matrices, Gram-Schmidt and a Jacobi SVD;
//! * [`weights`]: the weight family and its Gaussian calibration;
//! * [`locscale`]: location and scale, breakdown and convergence experiments;
//! * [`regress`]: robust generalised least squares and its covariance;
//! * [`tsvd`]: ordinary, robust and total low-rank factorizations.
//!
//! ```
//! use tsvd_core::weights::{calibrate, CalibrationTarget, Power};
//! use tsvd_core::locscale::{estimate, gaussian_quantile_sample};
//!
//! let spec = calibrate(CalibrationTarget::Efficacy(0.9), Power::Four).unwrap();
//! let mut xs = gaussian_quantile_sample(50);
//! xs.push(1e3);
//! let est = estimate(&xs, &spec, 1e-10, 500).unwrap();
//! assert!(est.n.abs() < 0.1);
//! ```

pub mod error;
pub mod fixed_point;
pub mod locscale;
pub mod matrix;
pub mod quadrature;
pub mod regress;
pub mod tsvd;
pub mod weights;

pub use error::{Error, Result};
pub use matrix::{DiagonalMatrix, Matrix};
pub use weights::WeightSpec;
