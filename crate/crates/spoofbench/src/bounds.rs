//! Closed-form deception-probability bounds and their estimators.
//!
//! Everything here is a pure function of aggregated statistics; the harness feeds them
//! from Monte Carlo runs and emits them next to the empirical rates. The four
//! report-facing quantities (CSV columns `lb_thm1`, `ub_cor1`, `lb_thm3`, `lb_thm4`)
//! are documented in `docs/BOUNDS.md` as statements T1, C1, T3 and T4; the shorthand
//! in the column names refers to that document.
//!
//! Conventions:
//!  * probability-valued bounds are clipped to [0, 1]; [`BoundValue`] keeps the raw
//!    value alongside so reports can show when a clip fired;
//!  * the information-theoretic upper bounds ([`fano_upper_bound`], [`g_upper_bound`])
//!    use base-2 logarithms, with the Gaussian-moment numerator of `g_upper_bound`
//!    carrying the `log₂e` conversion factor;
//!  * the information-gain term [`info_gain_psi`] uses the natural logarithm.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("invalid bound parameters: {0}")]
    InvalidParams(String),
    #[error("closed loop not stabilized: |Â − Ω| = {gap} ≥ 1")]
    NonStabilizing { gap: f64 },
    #[error("out of regime: √(δβ) = {root} must be strictly below the prior radius {radius}")]
    OutOfRegime { root: f64, radius: f64 },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("negative variance {0}")]
    NegativeVariance(f64),
}

/// One-sided 99% normal quantile, used by [`power_deficit_estimate`].
pub const Z99_ONE_SIDED: f64 = 2.3263478740408408;

/// A probability bound together with its unclipped value, so emitted reports can
/// record when the [0, 1] clip was active.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundValue {
    pub raw: f64,
    pub value: f64,
}

impl BoundValue {
    fn clip(raw: f64) -> Self {
        Self { raw, value: raw.clamp(0.0, 1.0) }
    }

    pub fn clipped(&self) -> bool {
        self.raw != self.value
    }
}

/// Parameters of the scalar-case bounds: detector threshold δ, excitation rate β,
/// learning-window length L, half-width R of the uniform gain prior, and the
/// disturbance variance σ².
#[derive(Clone, Copy, Debug)]
pub struct ScalarBoundParams {
    pub delta: f64,
    pub beta: f64,
    pub window: usize,
    pub prior_radius: f64,
    pub noise_var: f64,
}

impl ScalarBoundParams {
    pub fn validate(&self) -> Result<(), BoundsError> {
        if !(self.delta > 0.0) {
            return Err(BoundsError::InvalidParams(format!("delta = {} must be > 0", self.delta)));
        }
        if !(self.beta > 0.0) {
            return Err(BoundsError::InvalidParams(format!("beta = {} must be > 0", self.beta)));
        }
        if self.window == 0 {
            return Err(BoundsError::InvalidParams("window must be ≥ 1".into()));
        }
        if !(self.prior_radius > 0.0) {
            return Err(BoundsError::InvalidParams(format!(
                "prior radius = {} must be > 0",
                self.prior_radius
            )));
        }
        if self.noise_var < 0.0 {
            return Err(BoundsError::NegativeVariance(self.noise_var));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Lower bound T1 and its linear-controller form
// ---------------------------------------------------------------------------

/// Asymptotic deception-probability lower bound for the variance test:
/// `clip(1 − 2/(1+δβ)^{L/2})`.
pub fn deception_lower_bound(p: &ScalarBoundParams) -> Result<BoundValue, BoundsError> {
    p.validate()?;
    let raw = 1.0 - 2.0 / (1.0 + p.delta * p.beta).powf(p.window as f64 / 2.0);
    Ok(BoundValue::clip(raw))
}

/// Excitation rate of the stabilized linear loop `u = −Ω·y` run on the attacker's
/// model `Â`: `β = (1 − (Â−Ω)²)/σ²`. Requires `|Â − Ω| < 1` (stability of the
/// fictitious closed loop).
pub fn beta_linear(a_hat: f64, omega: f64, var_w: f64) -> Result<f64, BoundsError> {
    let gap = (a_hat - omega).abs();
    if gap >= 1.0 {
        return Err(BoundsError::NonStabilizing { gap });
    }
    if !(var_w > 0.0) {
        return Err(BoundsError::NegativeVariance(var_w));
    }
    Ok((1.0 - gap * gap) / var_w)
}

/// [`deception_lower_bound`] with β spelled out through [`beta_linear`].
pub fn deception_lower_bound_linear(
    delta: f64,
    var_w: f64,
    a_hat: f64,
    omega: f64,
    window: usize,
) -> Result<BoundValue, BoundsError> {
    let beta = beta_linear(a_hat, omega, var_w)?;
    deception_lower_bound(&ScalarBoundParams {
        delta,
        beta,
        window,
        prior_radius: 1.0,
        noise_var: var_w,
    })
}

// ---------------------------------------------------------------------------
// Upper bounds Λ and G
// ---------------------------------------------------------------------------

fn log2_ratio_denominator(p: &ScalarBoundParams) -> Result<f64, BoundsError> {
    let root = (p.delta * p.beta).sqrt();
    if root >= p.prior_radius {
        return Err(BoundsError::OutOfRegime { root, radius: p.prior_radius });
    }
    Ok((p.prior_radius / root).log2())
}

/// Fano-style deception upper bound `clip((I + 1)/log₂(R/√(δβ)))` from a supplied
/// mutual-information value `I` between the gain and the attacker's observations.
pub fn fano_upper_bound(mutual_info: f64, p: &ScalarBoundParams) -> Result<BoundValue, BoundsError> {
    p.validate()?;
    if mutual_info < 0.0 {
        return Err(BoundsError::InvalidParams(format!(
            "mutual information {mutual_info} must be ≥ 0"
        )));
    }
    let denom = log2_ratio_denominator(p)?;
    Ok(BoundValue::clip((mutual_info + 1.0) / denom))
}

/// Gaussian surrogate of the mutual information: replaces `I` in
/// [`fano_upper_bound`] with `(log₂e/(2σ²))·Σ E[(A·X_{k−1}+U_{k−1})²]`, where
/// `moment_sum` is the Monte Carlo estimate of the drift-power sum over the
/// learning window (averaged over trials and over the gain prior).
pub fn g_upper_bound(moment_sum: f64, p: &ScalarBoundParams) -> Result<BoundValue, BoundsError> {
    p.validate()?;
    if moment_sum < 0.0 {
        return Err(BoundsError::InvalidParams(format!(
            "second-moment sum {moment_sum} must be ≥ 0"
        )));
    }
    if !(p.noise_var > 0.0) {
        return Err(BoundsError::NegativeVariance(p.noise_var));
    }
    let denom = log2_ratio_denominator(p)?;
    let numer = std::f64::consts::LOG2_E / (2.0 * p.noise_var) * moment_sum + 1.0;
    Ok(BoundValue::clip(numer / denom))
}

// ---------------------------------------------------------------------------
// Watermark power-deficit condition
// ---------------------------------------------------------------------------

/// Sample estimate of `E[Ψ² + 2Ψ(a·x̄ + ū)]` with a one-sided 99% normal-approximation
/// half-width. The authentication scheme degrades the attacker's upper bound exactly
/// when this expectation is negative.
#[derive(Clone, Copy, Debug)]
pub struct ConditionEstimate {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
}

impl ConditionEstimate {
    /// Conservative verdict: the condition holds iff even the upper confidence edge
    /// is strictly negative.
    pub fn holds(&self) -> bool {
        self.mean + self.half_width < 0.0
    }
}

/// Aggregate per-step power-deficit samples (see
/// [`crate::controller::power_deficit_stat`]) into a [`ConditionEstimate`].
pub fn power_deficit_estimate(samples: &[f64]) -> Result<ConditionEstimate, BoundsError> {
    const MIN_SAMPLES: usize = 30;
    let n = samples.len();
    if n < MIN_SAMPLES {
        return Err(BoundsError::TooFewSamples { got: n, need: MIN_SAMPLES });
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let ss = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>();
    let sd = (ss / (n - 1) as f64).sqrt();
    let half_width = Z99_ONE_SIDED * sd / (n as f64).sqrt();
    Ok(ConditionEstimate { mean, half_width, n })
}

// ---------------------------------------------------------------------------
// Vector lower bound T3
// ---------------------------------------------------------------------------

/// Per-trial ingredients of the vector-case lower bound: whether the scaled Gram
/// cleared the excitation floor, and the accumulated `Σ‖w_k x_kᵀ‖` over the
/// learning window.
#[derive(Clone, Copy, Debug)]
pub struct VectorErrorSample {
    pub pe_event: bool,
    pub noise_regressor_norm_sum: f64,
}

/// Vector-case deception lower bound: `ρ · freq[(1/(ζL))·Σ‖w_k x_kᵀ‖ < √(γβ)]`.
///
/// The excitation probability ρ is supplied (it prices the PE event); the per-trial
/// `pe_event` flags are carried for reporting but do not gate the frequency.
pub fn vector_lower_bound_estimate(
    trials: &[VectorErrorSample],
    zeta: f64,
    window: usize,
    gamma: f64,
    beta: f64,
    rho: f64,
) -> Result<f64, BoundsError> {
    if trials.is_empty() {
        return Err(BoundsError::TooFewSamples { got: 0, need: 1 });
    }
    if !(zeta > 0.0) || window == 0 || !(gamma > 0.0) || !(beta > 0.0) {
        return Err(BoundsError::InvalidParams(format!(
            "need ζ > 0 (got {zeta}), L ≥ 1 (got {window}), γ > 0 (got {gamma}), β > 0 (got {beta})"
        )));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(BoundsError::InvalidParams(format!("ρ = {rho} must lie in [0,1]")));
    }
    let threshold = (gamma * beta).sqrt();
    let hits = trials
        .iter()
        .filter(|t| t.noise_regressor_norm_sum / (zeta * window as f64) < threshold)
        .count();
    Ok(rho * hits as f64 / trials.len() as f64)
}

// ---------------------------------------------------------------------------
// Nonlinear bound T4
// ---------------------------------------------------------------------------

/// Information gain accumulated by the attacker's GP over the learning phase:
/// `ψ = ½ Σ ln(1 + σ_k²(z)/σ²)` over the sequential posterior variances at each
/// next training input. Natural logarithm.
pub fn info_gain_psi(posterior_vars: &[f64], noise_var: f64) -> Result<f64, BoundsError> {
    if !(noise_var > 0.0) {
        return Err(BoundsError::NegativeVariance(noise_var));
    }
    let mut psi = 0.0;
    for &v in posterior_vars {
        if v < 0.0 {
            return Err(BoundsError::NegativeVariance(v));
        }
        psi += 0.5 * (1.0 + v / noise_var).ln();
    }
    Ok(psi)
}

/// Per-step confidence factor of the nonlinear bound:
/// `ξ = min(1, e^{ψ + 1 − ((ν−χ)/(4σσ_L))²})`.
///
/// A zero posterior std at the query degenerates the Gaussian tail: ξ = 0 when the
/// model-error level ν exceeds the function-norm bound χ, else 1.
pub fn gp_confidence_xi(
    psi: f64,
    chi: f64,
    sigma: f64,
    sigma_l_at_query: f64,
    nu: f64,
) -> Result<f64, BoundsError> {
    if !(chi > 0.0) || !(sigma > 0.0) || psi < 0.0 || nu < 0.0 || sigma_l_at_query < 0.0 {
        return Err(BoundsError::InvalidParams(format!(
            "need χ > 0 (got {chi}), σ > 0 (got {sigma}), ψ ≥ 0 (got {psi}), ν ≥ 0 (got {nu}), σ_L ≥ 0 (got {sigma_l_at_query})"
        )));
    }
    if sigma_l_at_query == 0.0 {
        return Ok(if nu > chi { 0.0 } else { 1.0 });
    }
    let z = (nu - chi) / (4.0 * sigma * sigma_l_at_query);
    Ok((psi + 1.0 - z * z).exp().min(1.0))
}

/// Nonlinear-case deception lower bound `p̄ · Π (1 − ξ_k)` over the hijack window.
pub fn nonlinear_lower_bound(p_bar: f64, xis: &[f64]) -> Result<f64, BoundsError> {
    if !(0.0..=1.0).contains(&p_bar) {
        return Err(BoundsError::InvalidParams(format!("p̄ = {p_bar} must lie in [0,1]")));
    }
    let mut prod = 1.0;
    for &xi in xis {
        if !(0.0..=1.0).contains(&xi) {
            return Err(BoundsError::InvalidParams(format!("ξ = {xi} must lie in [0,1]")));
        }
        prod *= 1.0 - xi;
    }
    Ok(p_bar * prod)
}
