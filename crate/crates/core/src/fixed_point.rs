//! Shared controls for the fixed-point iterations.

/// Componentwise acceleration is skipped once the observed contraction ratio
/// gets this close to one.
const MAX_ACCELERATED_RATIO: f64 = 0.95;

/// Controls for a fixed-point iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointOptions {
    /// Relative tolerance on the change between iterates.
    pub tol: f64,
    pub max_iter: usize,
    /// Apply Aitken extrapolation every third step.
    pub accelerate: bool,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            tol: 1e-10,
            max_iter: 500,
            accelerate: true,
        }
    }
}

/// Aitken extrapolation from three consecutive iterates, componentwise.
///
/// Returns `None` when some component is not contracting cleanly, in which
/// case the caller should keep the plain iterate.
pub(crate) fn aitken(x0: &[f64], x1: &[f64], x2: &[f64]) -> Option<Vec<f64>> {
    let mut out = x2.to_vec();
    for k in 0..x2.len() {
        let d1 = x1[k] - x0[k];
        let d2 = x2[k] - x1[k];
        let curvature = d2 - d1;
        if d1 == 0.0 || curvature == 0.0 {
            continue;
        }
        if (d2 / d1).abs() >= MAX_ACCELERATED_RATIO {
            return None;
        }
        out[k] = x2[k] - d2 * d2 / curvature;
        if !out[k].is_finite() {
            return None;
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aitken_is_exact_on_geometric_sequences() {
        // x_k = 3 + 2 * 0.6^k
        let x = |k: i32| 3.0 + 2.0 * 0.6f64.powi(k);
        let acc = aitken(&[x(0)], &[x(1)], &[x(2)]).unwrap();
        assert!((acc[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn aitken_refuses_slow_or_diverging_components() {
        assert!(aitken(&[0.0, 0.0], &[1.0, 1.0], &[1.5, 1.99]).is_none());
        let kept = aitken(&[1.0], &[1.0], &[1.0]).unwrap();
        assert_eq!(kept, vec![1.0]);
    }
}
