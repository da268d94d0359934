//! The attacker's toolkit: model learners (least squares, Gaussian-process regression),
//! a replay recorder, the fictitious plant that feeds the controller after the hijack,
//! and the malicious actuation driving the real plant.
//!
//! During the learning phase the attacker passively taps `(X_k, U_k)` pairs off the
//! wire. At the hijack step it freezes its model, initializes the fictitious state at
//! the last true state it saw, and from then on answers the controller with
//! `V_{k+1} = model(V_k, U_k) + W̃_k`, where `W̃` is fresh noise matched to the true
//! disturbance statistics.

use crate::core::{gaussian_sample, CoreError, Stream, SymmetricMatrix};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AttackerError {
    #[error("least-squares window is empty (no observation pairs)")]
    EmptyWindow,
    #[error("degenerate training data: {0}")]
    DegenerateData(String),
    #[error("replay buffer is empty")]
    EmptyReplayBuffer,
    #[error("replay queried at step {k} but recording only covers steps past {len}")]
    ReplayBeforeHijack { k: usize, len: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Gaussian-process model has not been fitted")]
    GpNotFitted,
    #[error("Gaussian-process solve failed: {0}")]
    GpSolveFailed(String),
    #[error("posterior variance {0} is negative beyond tolerance")]
    NegativeVariance(f64),
    #[error(transparent)]
    Core(#[from] CoreError),
}

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

/// Streaming scalar least squares for `x_{k+1} = a·x_k + u_k + w_k`:
/// accumulates `Σ x_k²` and `Σ (x_{k+1} − u_k)·x_k`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ScalarLSState {
    pub sum_xx: f64,
    pub sum_cross: f64,
    pub count: usize,
}

impl ScalarLSState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, x: f64, u: f64, x_next: f64) {
        self.sum_xx += x * x;
        self.sum_cross += (x_next - u) * x;
        self.count += 1;
    }

    /// Merge two partial accumulations (order-insensitive up to float rounding).
    pub fn merge(&mut self, other: &ScalarLSState) {
        self.sum_xx += other.sum_xx;
        self.sum_cross += other.sum_cross;
        self.count += other.count;
    }

    /// `Â = Σ(x_{k+1} − u_k)x_k / Σx_k²`. Degenerate data is an error, never a silent 0 —
    /// callers must decide what a meaningless estimate should do to their trial.
    pub fn estimate(&self) -> Result<f64, AttackerError> {
        if self.count == 0 {
            return Err(AttackerError::EmptyWindow);
        }
        if self.sum_xx == 0.0 {
            return Err(AttackerError::DegenerateData(
                "all regressor states are exactly zero".into(),
            ));
        }
        Ok(self.sum_cross / self.sum_xx)
    }
}

/// Streaming vector least squares: Gram `G = Σ x_k x_kᵀ` and cross term
/// `C = Σ (x_{k+1} − u_k) x_kᵀ`.
#[derive(Clone, Debug)]
pub struct VectorLSState {
    pub G: DMatrix<f64>,
    pub C: DMatrix<f64>,
    pub count: usize,
}

impl VectorLSState {
    pub fn new(n: usize) -> Self {
        Self {
            G: DMatrix::zeros(n, n),
            C: DMatrix::zeros(n, n),
            count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.G.nrows()
    }

    pub fn update(&mut self, x: &DVector<f64>, u: &DVector<f64>, x_next: &DVector<f64>) -> Result<(), AttackerError> {
        let n = self.dim();
        if x.len() != n || u.len() != n || x_next.len() != n {
            return Err(AttackerError::DimensionMismatch(format!(
                "accumulator dim {n}, got x:{} u:{} x':{}",
                x.len(),
                u.len(),
                x_next.len()
            )));
        }
        self.G += x * x.transpose();
        self.C += (x_next - u) * x.transpose();
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &VectorLSState) {
        self.G += &other.G;
        self.C += &other.C;
        self.count += other.count;
    }

    /// `Â = C·G⁻¹`, solved through an SVD of the Gram for conditioning headroom.
    ///
    /// A Gram with `λ_min(G) < 1e-10·(1 + tr G)` is treated as numerically singular and
    /// yields the all-zero matrix — the attacker's declared fallback model, not an error.
    pub fn estimate(&self) -> Result<DMatrix<f64>, AttackerError> {
        if self.count == 0 {
            return Err(AttackerError::EmptyWindow);
        }
        let n = self.dim();
        let sym = SymmetricMatrix::new((&self.G + self.G.transpose()) * 0.5)?;
        if sym.min_eigenvalue() < 1e-10 * (1.0 + self.G.trace()) {
            return Ok(DMatrix::zeros(n, n));
        }
        let svd = self.G.clone().svd(true, true);
        let a_hat_t = svd
            .solve(&self.C.transpose(), 0.0)
            .map_err(|e| AttackerError::DegenerateData(format!("Gram solve failed: {e}")))?;
        Ok(a_hat_t.transpose())
    }
}

// ---------------------------------------------------------------------------
// Gaussian-process regression
// ---------------------------------------------------------------------------

/// Kernel hyperparameters: a squared-exponential term plus a white term,
/// `k(z, z') = s²·exp(−‖z − z'‖²/(2ℓ²)) + w²·1[z = z']`.
#[derive(Clone, Copy, Debug)]
pub struct GpKernel {
    pub signal_var: f64,
    pub length_scale: f64,
    pub white_var: f64,
}

impl Default for GpKernel {
    fn default() -> Self {
        Self {
            signal_var: 1.0,
            length_scale: 1.0,
            white_var: 0.1,
        }
    }
}

impl GpKernel {
    fn eval(&self, p: &[f64; 2], q: &[f64; 2]) -> f64 {
        let d0 = p[0] - q[0];
        let d1 = p[1] - q[1];
        let rbf = self.signal_var * (-(d0 * d0 + d1 * d1) / (2.0 * self.length_scale * self.length_scale)).exp();
        if p == q {
            rbf + self.white_var
        } else {
            rbf
        }
    }

    /// Prior variance at any query point.
    pub fn prior_var(&self) -> f64 {
        self.signal_var + self.white_var
    }
}

/// GP regression of the next state on the joint input `z = (x, u)`.
///
/// Inputs are standardized per dimension before entering the kernel; targets stay raw.
/// Training is capped at `cap` observations (default 2000) — later observations are
/// counted but ignored. The `(K + σ²I)` factorization is computed once by [`GpState::fit`]
/// and cached for all posterior queries.
#[derive(Clone, Debug)]
pub struct GpState {
    pub kernel: GpKernel,
    pub noise_var: f64,
    cap: usize,
    inputs: Vec<[f64; 2]>,
    targets: Vec<f64>,
    skipped: usize,
    fit: Option<GpFit>,
}

#[derive(Clone, Debug)]
struct GpFit {
    shift: [f64; 2],
    scale: [f64; 2],
    z: Vec<[f64; 2]>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    alpha: DVector<f64>,
}

pub const GP_TRAINING_CAP: usize = 2000;

impl GpState {
    pub fn new(noise_var: f64) -> Self {
        Self::with_kernel(GpKernel::default(), noise_var, GP_TRAINING_CAP)
    }

    pub fn with_kernel(kernel: GpKernel, noise_var: f64, cap: usize) -> Self {
        Self {
            kernel,
            noise_var,
            cap,
            inputs: Vec::new(),
            targets: Vec::new(),
            skipped: 0,
            fit: None,
        }
    }

    /// Record one transition. Returns false (and counts it) once the cap is reached.
    pub fn observe(&mut self, x: f64, u: f64, x_next: f64) -> bool {
        if self.inputs.len() >= self.cap {
            self.skipped += 1;
            return false;
        }
        self.inputs.push([x, u]);
        self.targets.push(x_next);
        self.fit = None;
        true
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// Build and cache the posterior factorization `(K + σ²I)α = t`.
    pub fn fit(&mut self) -> Result<(), AttackerError> {
        let m = self.inputs.len();
        if m == 0 {
            return Err(AttackerError::DegenerateData("GP fit with no observations".into()));
        }
        let mut shift = [0.0f64; 2];
        let mut scale = [0.0f64; 2];
        for d in 0..2 {
            let mean = self.inputs.iter().map(|z| z[d]).sum::<f64>() / m as f64;
            let var = self.inputs.iter().map(|z| (z[d] - mean) * (z[d] - mean)).sum::<f64>() / m as f64;
            shift[d] = mean;
            scale[d] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        let z: Vec<[f64; 2]> = self
            .inputs
            .iter()
            .map(|p| [(p[0] - shift[0]) / scale[0], (p[1] - shift[1]) / scale[1]])
            .collect();
        let mut K = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = self.kernel.eval(&z[i], &z[j]);
                K[(i, j)] = v;
                K[(j, i)] = v;
            }
        }
        for i in 0..m {
            K[(i, i)] += self.noise_var;
        }
        // The diagonal already carries white_var + noise_var; escalate jitter only if a
        // pathological configuration (both zero) defeats the factorization.
        let mut jitter = 0.0;
        let chol = loop {
            let mut kj = K.clone();
            if jitter > 0.0 {
                for i in 0..m {
                    kj[(i, i)] += jitter;
                }
            }
            match nalgebra::Cholesky::new(kj) {
                Some(c) => break c,
                None => {
                    jitter = if jitter == 0.0 { 1e-12 } else { jitter * 10.0 };
                    if jitter > 1e-6 {
                        return Err(AttackerError::GpSolveFailed(format!(
                            "Cholesky failed even with jitter {jitter:.1e}"
                        )));
                    }
                }
            }
        };
        let t = DVector::from_column_slice(&self.targets);
        let alpha = chol.solve(&t);
        self.fit = Some(GpFit { shift, scale, z, chol, alpha });
        Ok(())
    }

    /// Information gained about the regression function over the training set:
    /// `½·(ln det(K + σ²I) − m·ln σ²)`, the log volume ratio between prior and
    /// noise-only covariance under the fitted standardized geometry. Equals the sum of
    /// the sequential per-observation gains `½·ln(1 + σ_{k−1}²(z_k)/σ²)` whenever the
    /// geometry is held fixed, without the O(m⁴) cost of refitting per prefix.
    pub fn info_gain(&self) -> Result<f64, AttackerError> {
        let fit = self.fit.as_ref().ok_or(AttackerError::GpNotFitted)?;
        if !(self.noise_var > 0.0) {
            return Err(AttackerError::NegativeVariance(self.noise_var));
        }
        let l = fit.chol.l();
        let m = fit.z.len();
        let logdet = 2.0 * (0..m).map(|i| l[(i, i)].ln()).sum::<f64>();
        Ok(0.5 * (logdet - m as f64 * self.noise_var.ln()))
    }

    /// Posterior mean and variance at the joint input `(x, u)`.
    ///
    /// Variance is clamped to zero from tiny negative rounding (≥ −1e-12); anything more
    /// negative is surfaced as an error.
    pub fn posterior(&self, x: f64, u: f64) -> Result<(f64, f64), AttackerError> {
        let fit = self.fit.as_ref().ok_or(AttackerError::GpNotFitted)?;
        let zq = [(x - fit.shift[0]) / fit.scale[0], (u - fit.shift[1]) / fit.scale[1]];
        let m = fit.z.len();
        let kstar = DVector::from_fn(m, |i, _| self.kernel.eval(&zq, &fit.z[i]));
        let mean = kstar.dot(&fit.alpha);
        let w = fit.chol.solve(&kstar);
        let var = self.kernel.eval(&zq, &zq) - kstar.dot(&w);
        if var < -1e-12 {
            return Err(AttackerError::NegativeVariance(var));
        }
        Ok((mean, var.max(0.0)))
    }
}

// ---------------------------------------------------------------------------
// Fictitious plants
// ---------------------------------------------------------------------------

/// Scalar fictitious plant `V_{k+1} = Â·V_k + U_k + W̃_k`, `W̃ ~ N(0, σ²)` matched to the
/// true disturbance. Initialize with `v0 = X_L` (the last pre-hijack state).
#[derive(Clone, Copy, Debug)]
pub struct FictitiousScalar {
    pub a_hat: f64,
    pub noise_var: f64,
    pub v: f64,
}

impl FictitiousScalar {
    pub fn new(a_hat: f64, noise_var: f64, v0: f64) -> Self {
        Self { a_hat, noise_var, v: v0 }
    }

    pub fn step(&mut self, u: f64, stream: &mut Stream) -> Result<f64, AttackerError> {
        let w = stream.normal(0.0, self.noise_var).map_err(AttackerError::from)?;
        self.v = self.a_hat * self.v + u + w;
        Ok(self.v)
    }
}

/// Vector fictitious plant `V' = Â·V + U + W̃`, `W̃ ~ N(0, Σ)`.
#[derive(Clone, Debug)]
pub struct FictitiousVector {
    pub A_hat: DMatrix<f64>,
    pub noise_cov: SymmetricMatrix,
    pub v: DVector<f64>,
}

impl FictitiousVector {
    pub fn new(A_hat: DMatrix<f64>, noise_cov: SymmetricMatrix, v0: DVector<f64>) -> Self {
        Self { A_hat, noise_cov, v: v0 }
    }

    pub fn step(&mut self, u: &DVector<f64>, stream: &mut Stream) -> Result<&DVector<f64>, AttackerError> {
        let w = gaussian_sample(&DVector::zeros(self.v.len()), &self.noise_cov, stream)?;
        self.v = &self.A_hat * &self.v + u + w;
        Ok(&self.v)
    }
}

/// GP-driven fictitious plant `V' = m̂(V, U) + W̃`.
#[derive(Clone, Debug)]
pub struct FictitiousGp {
    pub gp: GpState,
    pub noise_var: f64,
    pub v: f64,
}

impl FictitiousGp {
    pub fn new(gp: GpState, noise_var: f64, v0: f64) -> Self {
        Self { gp, noise_var, v: v0 }
    }

    pub fn step(&mut self, u: f64, stream: &mut Stream) -> Result<f64, AttackerError> {
        let (mean, _) = self.gp.posterior(self.v, u)?;
        let w = stream.normal(0.0, self.noise_var).map_err(AttackerError::from)?;
        self.v = mean + w;
        Ok(self.v)
    }
}

// ---------------------------------------------------------------------------
// Replay
// ---------------------------------------------------------------------------

/// Record-then-loop replay attack: observations `Y_1..Y_RL` are recorded; from step
/// `RL + 1` on, the buffer is played back cyclically.
#[derive(Clone, Debug, Default)]
pub struct ReplayBuffer {
    rec: Vec<Vec<f64>>,
}

impl ReplayBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, y: &[f64]) {
        self.rec.push(y.to_vec());
    }

    pub fn len(&self) -> usize {
        self.rec.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rec.is_empty()
    }

    /// Observation replayed at absolute step `k > RL`: entry `1 + ((k − RL − 1) mod RL)`
    /// of the recording (1-based).
    pub fn playback(&self, k: usize) -> Result<&[f64], AttackerError> {
        let len = self.rec.len();
        if len == 0 {
            return Err(AttackerError::EmptyReplayBuffer);
        }
        if k <= len {
            return Err(AttackerError::ReplayBeforeHijack { k, len });
        }
        let idx = 1 + (k - len - 1) % len;
        Ok(&self.rec[idx - 1])
    }
}

// ---------------------------------------------------------------------------
// Malicious actuation
// ---------------------------------------------------------------------------

/// What the attacker feeds the real plant once it controls the actuator channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MaliciousActuation {
    /// Do nothing (the plant coasts open-loop).
    Zero,
    /// `ũ = μ·x`: positive feedback on the true state.
    DestabilizeGain { mu: f64 },
}

/// Scalar malicious input.
#[inline]
pub fn malicious_input(rule: &MaliciousActuation, x: f64) -> f64 {
    match *rule {
        MaliciousActuation::Zero => 0.0,
        MaliciousActuation::DestabilizeGain { mu } => mu * x,
    }
}

/// Vector malicious input (the same scalar gain applied componentwise).
pub fn malicious_input_vector(rule: &MaliciousActuation, x: &DVector<f64>) -> DVector<f64> {
    match *rule {
        MaliciousActuation::Zero => DVector::zeros(x.len()),
        MaliciousActuation::DestabilizeGain { mu } => x * mu,
    }
}

/// Default destabilizing gain for a nominal open-loop gain `a`: the smallest-magnitude
/// `μ` with `|a + μ| = 1.5`, pushing away from the origin in `a`'s own direction.
pub fn default_destabilizing_gain(a_nominal: f64) -> f64 {
    if a_nominal >= 0.0 {
        1.5 - a_nominal
    } else {
        -1.5 - a_nominal
    }
}
