//! Anomaly detection on the controller side: model-based residuals and two
//! second-moment tests over a post-learning window.
//!
//! The detector trusts the nominal plant model `(a, σ²)` — it checks whether the
//! observation stream is *statistically consistent* with that model, not whether the
//! model is right. Residuals are formed from consecutive observations and the applied
//! control; under no attack they are exactly the i.i.d. disturbances, so their
//! empirical second moment concentrates at the nominal one. A man-in-the-middle that
//! feeds fictitious observations with a learning error inflates the residual power by
//! `(Â − a)²·E[V²]`, which is what both tests are sized to catch.
//!
//! Conventions, fixed across the whole crate:
//!  * Residuals are indexed `k = 1..T`: `r_k = y_{k+1} − a·y_k − u_k`, so a window of
//!    length `T` needs observations `Y_1..Y_{T+1}`.
//!  * The scalar test alarms when `(1/T)Σ r_k²` leaves the *open* interval
//!    `(σ² − δ, σ² + δ)`.
//!  * The matrix test alarms when `‖Σ − (1/T)Σ r_k r_kᵀ‖` (operator norm) *exceeds* γ;
//!    equality at the threshold does not alarm.

use crate::core::{loewner_geq, operator_norm, CoreError, SymmetricMatrix};
use nalgebra::DVector;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("window contract violated: expected {expected} residuals, got {got}")]
    WindowMismatch { expected: usize, got: usize },
    #[error("threshold must be positive, got {0}")]
    NonPositiveThreshold(f64),
    #[error("negative nominal variance {0}")]
    NegativeVariance(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

// ---------------------------------------------------------------------------
// Residuals
// ---------------------------------------------------------------------------

/// Scalar residual `r = y_next − a·y − u`.
#[inline]
pub fn residual_scalar(a: f64, y: f64, u: f64, y_next: f64) -> f64 {
    y_next - a * y - u
}

/// Vector residual `r = y_next − A·y − u`.
pub fn residual_vector(
    A: &nalgebra::DMatrix<f64>,
    y: &DVector<f64>,
    u: &DVector<f64>,
    y_next: &DVector<f64>,
) -> Result<DVector<f64>, DetectorError> {
    let n = A.nrows();
    if A.ncols() != n || y.len() != n || u.len() != n || y_next.len() != n {
        return Err(DetectorError::DimensionMismatch(format!(
            "A is {}x{}, y:{} u:{} y':{}",
            A.nrows(),
            A.ncols(),
            y.len(),
            u.len(),
            y_next.len()
        )));
    }
    Ok(y_next - A * y - u)
}

/// Residual against a known nonlinear drift: `r = y_next − f(y, u)`.
#[inline]
pub fn residual_nonlinear(f: impl Fn(f64, f64) -> f64, y: f64, u: f64, y_next: f64) -> f64 {
    y_next - f(y, u)
}

// ---------------------------------------------------------------------------
// Scalar variance test
// ---------------------------------------------------------------------------

/// Two-sided empirical-variance test over a fixed window.
///
/// No alarm iff `(1/T)Σ r_k² ∈ (σ² − δ, σ² + δ)` — open interval, so landing exactly
/// on a boundary alarms. Any non-finite residual alarms unconditionally.
#[derive(Clone, Copy, Debug)]
pub struct VarianceTest {
    pub nominal_var: f64,
    pub delta: f64,
    pub window: usize,
}

impl VarianceTest {
    pub fn new(nominal_var: f64, delta: f64, window: usize) -> Result<Self, DetectorError> {
        if nominal_var < 0.0 {
            return Err(DetectorError::NegativeVariance(nominal_var));
        }
        if delta <= 0.0 {
            return Err(DetectorError::NonPositiveThreshold(delta));
        }
        if window == 0 {
            return Err(DetectorError::WindowMismatch { expected: 1, got: 0 });
        }
        Ok(Self { nominal_var, delta, window })
    }

    /// Empirical second moment of a full window of residuals.
    pub fn statistic(&self, residuals: &[f64]) -> Result<f64, DetectorError> {
        if residuals.len() != self.window {
            return Err(DetectorError::WindowMismatch {
                expected: self.window,
                got: residuals.len(),
            });
        }
        Ok(residuals.iter().map(|r| r * r).sum::<f64>() / self.window as f64)
    }

    /// True iff the detector raises an alarm on this window.
    pub fn alarms(&self, residuals: &[f64]) -> Result<bool, DetectorError> {
        let stat = self.statistic(residuals)?;
        if !stat.is_finite() {
            return Ok(true);
        }
        Ok(!(stat > self.nominal_var - self.delta && stat < self.nominal_var + self.delta))
    }
}

/// Analytic cap on the variance test's false-alarm probability under nominal
/// conditions: `min(1, 3σ⁴/(δ²·T))`.
pub fn false_alarm_bound(nominal_var: f64, delta: f64, window: usize) -> Result<f64, DetectorError> {
    if nominal_var < 0.0 {
        return Err(DetectorError::NegativeVariance(nominal_var));
    }
    if delta <= 0.0 {
        return Err(DetectorError::NonPositiveThreshold(delta));
    }
    if window == 0 {
        return Err(DetectorError::WindowMismatch { expected: 1, got: 0 });
    }
    Ok((3.0 * nominal_var * nominal_var / (delta * delta * window as f64)).min(1.0))
}

// ---------------------------------------------------------------------------
// Matrix covariance test
// ---------------------------------------------------------------------------

/// Operator-norm covariance test: no alarm iff
/// `‖Σ − (1/T)Σ r_k r_kᵀ‖ ≤ γ` (closed comparison).
#[derive(Clone, Debug)]
pub struct CovarianceTest {
    pub nominal_cov: SymmetricMatrix,
    pub gamma: f64,
    pub window: usize,
}

impl CovarianceTest {
    pub fn new(nominal_cov: SymmetricMatrix, gamma: f64, window: usize) -> Result<Self, DetectorError> {
        if gamma <= 0.0 {
            return Err(DetectorError::NonPositiveThreshold(gamma));
        }
        if window == 0 {
            return Err(DetectorError::WindowMismatch { expected: 1, got: 0 });
        }
        Ok(Self { nominal_cov, gamma, window })
    }

    /// `‖Σ − (1/T)Σ r_k r_kᵀ‖` over a full window.
    pub fn statistic(&self, residuals: &[DVector<f64>]) -> Result<f64, DetectorError> {
        if residuals.len() != self.window {
            return Err(DetectorError::WindowMismatch {
                expected: self.window,
                got: residuals.len(),
            });
        }
        let n = self.nominal_cov.dim();
        let mut emp = nalgebra::DMatrix::zeros(n, n);
        for r in residuals {
            if r.len() != n {
                return Err(DetectorError::DimensionMismatch(format!(
                    "residual of length {} against {n}-dimensional nominal covariance",
                    r.len()
                )));
            }
            emp += r * r.transpose();
        }
        emp /= self.window as f64;
        Ok(operator_norm(&(self.nominal_cov.as_matrix() - emp)))
    }

    pub fn alarms(&self, residuals: &[DVector<f64>]) -> Result<bool, DetectorError> {
        let stat = self.statistic(residuals)?;
        if !stat.is_finite() {
            return Ok(true);
        }
        Ok(stat > self.gamma)
    }
}

// ---------------------------------------------------------------------------
// Excitation check
// ---------------------------------------------------------------------------

/// Whether the scaled Gram `G/τ` dominates `ζI` in the Loewner order — the
/// data-richness condition under which least-squares error bounds apply.
pub fn persistent_excitation_check(
    gram: &SymmetricMatrix,
    tau: usize,
    zeta: f64,
) -> Result<bool, DetectorError> {
    if tau == 0 {
        return Err(DetectorError::WindowMismatch { expected: 1, got: 0 });
    }
    if zeta <= 0.0 {
        return Err(DetectorError::NonPositiveThreshold(zeta));
    }
    let scaled = SymmetricMatrix::new(gram.as_matrix() / tau as f64)?;
    let floor = SymmetricMatrix::scaled_identity(gram.dim(), zeta);
    Ok(loewner_geq(&scaled, &floor)?)
}
