//! Control policies, authenticated (watermarked) policy state, and LQ cost.
//!
//! # Authentication by private excitation
//!
//! An *authenticated* policy transmits `U_k = Ū_k + Γ_k`: the base policy's action plus
//! a privacy signal known only to the controller. Anyone tapping the wire sees only the
//! sum. For scalar plants the controller additionally maintains the recursion
//!
//! ```text
//! Ψ_k = a·Ψ_{k−1} + Γ_k,      Ψ_0 = 0,
//! ```
//!
//! which tracks exactly how much of the current state is due to past privacy signals.
//! Subtracting it reconstructs the *twin* state `x̄_k = y_k − Ψ_{k−1}` — the state the
//! closed loop would have had with the same noise and no watermark — and the base policy
//! is evaluated on that twin (`Ū_k = π(x̄_k)`). This keeps the base policy's behaviour
//! unchanged by its own watermark while the state seen by an eavesdropper carries the
//! full excitation.
//!
//! The `recursive` signal kind sets `Γ_k = −(a·x̄_k + Ū_k)/η − a·Ψ_{k−1}`, which induces
//! `Ψ_k = −(a·x̄_k + Ū_k)/η`: the watermark then *removes* a 1/η fraction of the
//! predictable part of the next state, which provably degrades what an eavesdropper can
//! learn (see `bounds::power_deficit_condition`). Values `η ≤ ½` flip the sign of that
//! degradation and are rejected; values in `(½, 3)` are accepted but flagged, since the
//! sufficiency analysis behind the construction assumes `η ≥ 3`.
//!
//! Vector-valued privacy is an i.i.d. additive signal on the actual observation
//! (`U_k = π(y_k) + Γ_k`); no twin bookkeeping is kept in the vector case.

use crate::core::{gaussian_sample, CoreError, Stream, SymmetricMatrix};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("unknown nonlinear policy '{0}' (available: {1})")]
    UnknownNonlinear(String, &'static str),
    #[error("recursive privacy signal requires η > 1/2, got {0}")]
    EtaOutOfRange(f64),
    #[error("privacy variance must be nonnegative, got {0}")]
    NegativeVariance(f64),
    #[error("LQ weights must be nonnegative, got q={0}, r={1}")]
    NegativeWeights(f64, f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("policy kind does not apply: {0}")]
    KindMismatch(&'static str),
    #[error(transparent)]
    Core(#[from] CoreError),
}

/// Memoryless control policies.
#[derive(Clone, Debug)]
pub enum ControlPolicy {
    /// `u = 0`.
    Zero,
    /// `u = −Ω·y`.
    LinearGain { omega: f64 },
    /// `u = −K·y`.
    LinearGainMatrix { K: DMatrix<f64> },
    /// Named scalar nonlinear policy from the closed registry.
    NonlinearNamed { name: &'static str, f: fn(f64) -> f64 },
}

fn quadratic_damper(y: f64) -> f64 {
    -1.1 * y * y
}

/// Names accepted by [`nonlinear_policy`].
pub const POLICY_REGISTRY: &str = "quadratic-damper";

/// Look up a named nonlinear policy. `quadratic-damper` is `u = −1.1·y²`.
pub fn nonlinear_policy(name: &str) -> Result<ControlPolicy, ControllerError> {
    match name {
        "quadratic-damper" => Ok(ControlPolicy::NonlinearNamed {
            name: "quadratic-damper",
            f: quadratic_damper,
        }),
        _ => Err(ControllerError::UnknownNonlinear(name.to_string(), POLICY_REGISTRY)),
    }
}

/// Scalar action of a policy.
pub fn control_action(policy: &ControlPolicy, y: f64) -> Result<f64, ControllerError> {
    match policy {
        ControlPolicy::Zero => Ok(0.0),
        ControlPolicy::LinearGain { omega } => Ok(-omega * y),
        ControlPolicy::NonlinearNamed { f, .. } => Ok(f(y)),
        ControlPolicy::LinearGainMatrix { .. } => {
            Err(ControllerError::KindMismatch("matrix gain applied to scalar observation"))
        }
    }
}

/// Vector action of a policy.
pub fn control_action_vector(policy: &ControlPolicy, y: &DVector<f64>) -> Result<DVector<f64>, ControllerError> {
    match policy {
        ControlPolicy::Zero => Ok(DVector::zeros(y.len())),
        ControlPolicy::LinearGainMatrix { K } => {
            if K.ncols() != y.len() {
                return Err(ControllerError::DimensionMismatch(format!(
                    "gain is {}×{}, observation has length {}",
                    K.nrows(),
                    K.ncols(),
                    y.len()
                )));
            }
            Ok(-(K * y))
        }
        ControlPolicy::LinearGain { omega } => Ok(y * -*omega),
        ControlPolicy::NonlinearNamed { .. } => {
            Err(ControllerError::KindMismatch("named nonlinear policies are scalar-only"))
        }
    }
}

/// What privacy signal, if any, an authenticated policy injects.
#[derive(Clone, Debug)]
pub enum PrivacySignalSpec {
    /// No watermark; the authenticated wrapper is a bit-exact pass-through.
    None,
    /// `Γ_k ~ N(0, var)` i.i.d. (scalar).
    IidGaussian { var: f64 },
    /// `Γ_k ~ N(0, cov)` i.i.d. (vector; composed on the actual observation).
    IidGaussianVector { cov: SymmetricMatrix },
    /// The recursive attenuating watermark described in the module docs.
    Recursive { eta: f64 },
}

impl PrivacySignalSpec {
    /// Validate parameters. Returns `true` when they are accepted but outside the
    /// regime the design analysis assumes (recursive with `½ < η < 3`).
    pub fn validate(&self) -> Result<bool, ControllerError> {
        match self {
            PrivacySignalSpec::None | PrivacySignalSpec::IidGaussianVector { .. } => Ok(false),
            PrivacySignalSpec::IidGaussian { var } => {
                if *var < 0.0 {
                    Err(ControllerError::NegativeVariance(*var))
                } else {
                    Ok(false)
                }
            }
            PrivacySignalSpec::Recursive { eta } => {
                if *eta <= 0.5 {
                    Err(ControllerError::EtaOutOfRange(*eta))
                } else {
                    Ok(*eta < 3.0)
                }
            }
        }
    }
}

/// Controller-side state of an authenticated scalar policy: the base policy, the plant
/// gain it compensates for, the watermark history, and the accumulated `Ψ`.
#[derive(Clone, Debug)]
pub struct AuthenticatedPolicyState {
    base: ControlPolicy,
    spec: PrivacySignalSpec,
    a: f64,
    psi: f64,
    history: Vec<f64>,
}

impl AuthenticatedPolicyState {
    /// `a` is the scalar plant gain used in the `Ψ` recursion (trusted configuration).
    pub fn new(base: ControlPolicy, spec: PrivacySignalSpec, a: f64) -> Result<Self, ControllerError> {
        spec.validate()?;
        if matches!(spec, PrivacySignalSpec::IidGaussianVector { .. }) {
            return Err(ControllerError::KindMismatch(
                "vector privacy signals carry no scalar twin state; compose them directly",
            ));
        }
        Ok(Self {
            base,
            spec,
            a,
            psi: 0.0,
            history: Vec::new(),
        })
    }

    /// Accumulated `Ψ_k` after the most recent [`authenticated_action`].
    pub fn psi(&self) -> f64 {
        self.psi
    }

    /// Twin observation `x̄_k = y_k − Ψ_{k−1}`.
    pub fn twin_observation(&self, y: f64) -> f64 {
        y - self.psi
    }

    /// Base action on the twin observation.
    pub fn base_action(&self, xbar: f64) -> Result<f64, ControllerError> {
        control_action(&self.base, xbar)
    }

    pub fn signal_history(&self) -> &[f64] {
        &self.history
    }

    pub fn spec(&self) -> &PrivacySignalSpec {
        &self.spec
    }
}

/// Next privacy signal `Γ_k` for a scalar authenticated policy.
///
/// I.i.d. kinds draw fresh noise; the recursive kind is the deterministic function of
/// `(x̄_k, ū_k, Ψ_{k−1})` from the module docs. Does not advance the state — pair with
/// [`authenticated_action`].
pub fn privacy_signal_next(
    state: &AuthenticatedPolicyState,
    xbar: f64,
    ubar: f64,
    stream: &mut Stream,
) -> Result<f64, ControllerError> {
    match &state.spec {
        PrivacySignalSpec::None => Ok(0.0),
        PrivacySignalSpec::IidGaussian { var } => Ok(stream.normal(0.0, *var)?),
        PrivacySignalSpec::Recursive { eta } => {
            Ok(-(state.a * xbar + ubar) / eta - state.a * state.psi)
        }
        PrivacySignalSpec::IidGaussianVector { .. } => {
            Err(ControllerError::KindMismatch("vector privacy signal in scalar context"))
        }
    }
}

/// Compose the transmitted action `u_k = ū_k + Γ_k` and advance `Ψ_k = a·Ψ_{k−1} + Γ_k`.
pub fn authenticated_action(state: &mut AuthenticatedPolicyState, ubar: f64, gamma: f64) -> f64 {
    state.psi = state.a * state.psi + gamma;
    state.history.push(gamma);
    ubar + gamma
}

/// Draw one vector privacy signal `Γ ~ N(0, cov)`.
pub fn vector_privacy_signal(cov: &SymmetricMatrix, stream: &mut Stream) -> Result<DVector<f64>, ControllerError> {
    Ok(gaussian_sample(&DVector::zeros(cov.dim()), cov, stream)?)
}

/// Per-step statistic whose negative mean certifies that a watermark strictly degrades
/// an eavesdropper's learning: `Ψ_k² + 2·Ψ_k·(a·x̄_k + ū_k)`.
///
/// For the recursive kind this collapses algebraically to `(1/η² − 2/η)(a·x̄_k + ū_k)²`,
/// which is nonpositive exactly when `η > ½`.
#[inline]
pub fn power_deficit_stat(psi_k: f64, drift_k: f64) -> f64 {
    psi_k * psi_k + 2.0 * psi_k * drift_k
}

/// Weights of the quadratic cost `(1/T)·Σ_{k=0..T} (q·‖x_k‖² + r·‖u_k‖²)`.
#[derive(Clone, Copy, Debug)]
pub struct LQWeights {
    pub q: f64,
    pub r: f64,
}

impl LQWeights {
    pub fn new(q: f64, r: f64) -> Result<Self, ControllerError> {
        if q < 0.0 || r < 0.0 {
            return Err(ControllerError::NegativeWeights(q, r));
        }
        Ok(Self { q, r })
    }
}

/// Time-averaged LQ cost over `k = 0..=T` (inclusive ends, `T+1` terms, divided by `T`).
pub fn lq_cost(states: &[f64], controls: &[f64], w: &LQWeights, T: usize) -> Result<f64, ControllerError> {
    if states.len() < T + 1 || controls.len() < T + 1 {
        return Err(ControllerError::DimensionMismatch(format!(
            "need {} states and controls, got {} and {}",
            T + 1,
            states.len(),
            controls.len()
        )));
    }
    if T == 0 {
        return Err(ControllerError::DimensionMismatch("LQ horizon must be positive".into()));
    }
    let mut acc = 0.0;
    for k in 0..=T {
        acc += w.q * states[k] * states[k] + w.r * controls[k] * controls[k];
    }
    Ok(acc / T as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::RandomSource;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn linear_gain_oracle() {
        let p = ControlPolicy::LinearGain { omega: 0.88 };
        assert_eq!(control_action(&p, 2.0).unwrap(), -1.76);
        assert_eq!(control_action(&ControlPolicy::Zero, 5.0).unwrap(), 0.0);
    }

    #[test]
    fn matrix_gain_oracle() {
        let A = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let p = ControlPolicy::LinearGainMatrix { K: 0.9 * &A };
        let y = DVector::from_column_slice(&[1.0, 0.0]);
        let u = control_action_vector(&p, &y).unwrap();
        assert_relative_eq!(u[0], -0.9, epsilon = 1e-15);
        assert_relative_eq!(u[1], -2.7, epsilon = 1e-15);
        assert!(control_action(&p, 1.0).is_err());
    }

    #[test]
    fn nonlinear_policy_registry() {
        let p = nonlinear_policy("quadratic-damper").unwrap();
        assert_relative_eq!(control_action(&p, 2.0).unwrap(), -4.4, epsilon = 1e-15);
        assert!(nonlinear_policy("cubic-damper").is_err());
        assert!(control_action_vector(&p, &DVector::zeros(2)).is_err());
    }

    #[test]
    fn eta_validation_boundaries() {
        assert!(matches!(
            PrivacySignalSpec::Recursive { eta: 0.4 }.validate(),
            Err(ControllerError::EtaOutOfRange(_))
        ));
        assert!(matches!(
            PrivacySignalSpec::Recursive { eta: 0.5 }.validate(),
            Err(ControllerError::EtaOutOfRange(_))
        ));
        // accepted but flagged: outside the η ≥ 3 design regime
        assert_eq!(PrivacySignalSpec::Recursive { eta: 2.0 }.validate().unwrap(), true);
        assert_eq!(PrivacySignalSpec::Recursive { eta: 3.0 }.validate().unwrap(), false);
        assert_eq!(PrivacySignalSpec::Recursive { eta: 5.0 }.validate().unwrap(), false);
        assert!(PrivacySignalSpec::IidGaussian { var: -1.0 }.validate().is_err());
    }

    #[test]
    fn recursive_signal_worked_example() {
        // a = 1, η = 3, x̄₁ = 3, ū₁ = 0 ⇒ Γ₁ = −1 and Ψ₁ = −1
        let mut st = AuthenticatedPolicyState::new(
            ControlPolicy::Zero,
            PrivacySignalSpec::Recursive { eta: 3.0 },
            1.0,
        )
        .unwrap();
        let src = RandomSource::new(0);
        let mut stream = src.stream(0);
        let gamma = privacy_signal_next(&st, 3.0, 0.0, &mut stream).unwrap();
        assert_relative_eq!(gamma, -1.0, epsilon = 1e-15);
        let u = authenticated_action(&mut st, 0.0, gamma);
        assert_relative_eq!(u, -1.0, epsilon = 1e-15);
        assert_relative_eq!(st.psi(), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn psi_recurrence_worked_example() {
        // a = 0.5, Γ = (1, 1): Ψ₁ = 1, Ψ₂ = 0.5·1 + 1 = 1.5
        let mut st = AuthenticatedPolicyState::new(
            ControlPolicy::Zero,
            PrivacySignalSpec::IidGaussian { var: 1.0 },
            0.5,
        )
        .unwrap();
        authenticated_action(&mut st, 0.0, 1.0);
        authenticated_action(&mut st, 0.0, 1.0);
        assert_relative_eq!(st.psi(), 1.5, epsilon = 1e-15);
        assert_eq!(st.signal_history(), &[1.0, 1.0]);
    }

    #[test]
    fn recursive_signal_induces_psi_identity() {
        // after every step, Ψ_k must equal −(a·x̄_k + ū_k)/η
        let a = 0.8;
        let eta = 3.0;
        let mut st = AuthenticatedPolicyState::new(
            ControlPolicy::LinearGain { omega: 0.3 },
            PrivacySignalSpec::Recursive { eta },
            a,
        )
        .unwrap();
        let src = RandomSource::new(123);
        let mut stream = src.stream(0);
        let mut noise = src.stream(1);
        let mut y = 1.7;
        for _ in 0..200 {
            let xbar = st.twin_observation(y);
            let ubar = st.base_action(xbar).unwrap();
            let gamma = privacy_signal_next(&st, xbar, ubar, &mut stream).unwrap();
            let u = authenticated_action(&mut st, ubar, gamma);
            assert_relative_eq!(st.psi(), -(a * xbar + ubar) / eta, max_relative = 1e-12);
            y = a * y + u + noise.standard_normal();
        }
    }

    #[test]
    fn no_privacy_is_bit_exact_passthrough() {
        let base = ControlPolicy::LinearGain { omega: 0.88 };
        let mut st = AuthenticatedPolicyState::new(base.clone(), PrivacySignalSpec::None, 1.3).unwrap();
        let src = RandomSource::new(55);
        let mut stream = src.stream(0);
        let mut noise = src.stream(1);
        let mut y = 0.4;
        for _ in 0..500 {
            let xbar = st.twin_observation(y);
            assert_eq!(xbar.to_bits(), y.to_bits());
            let ubar = st.base_action(xbar).unwrap();
            let gamma = privacy_signal_next(&st, xbar, ubar, &mut stream).unwrap();
            assert_eq!(gamma, 0.0);
            let u = authenticated_action(&mut st, ubar, gamma);
            assert_eq!(u.to_bits(), control_action(&base, y).unwrap().to_bits());
            assert_eq!(st.psi(), 0.0);
            y = 1.3 * y + u + noise.standard_normal();
        }
    }

    #[test]
    fn iid_signal_variance_matches() {
        let mut st = AuthenticatedPolicyState::new(
            ControlPolicy::Zero,
            PrivacySignalSpec::IidGaussian { var: 9.0 },
            1.0,
        )
        .unwrap();
        let src = RandomSource::new(10);
        let mut stream = src.stream(0);
        let n = 100_000;
        let mut acc = 0.0;
        let mut prev = None;
        for _ in 0..n {
            let g = privacy_signal_next(&st, 0.0, 0.0, &mut stream).unwrap();
            if let Some(p) = prev {
                assert_ne!(p, g, "i.i.d. draws must be fresh");
            }
            prev = Some(g);
            authenticated_action(&mut st, 0.0, g);
            acc += g * g;
        }
        assert!((acc / n as f64 - 9.0).abs() / 9.0 < 0.02);
    }

    #[test]
    fn power_deficit_identity_for_recursive_kind() {
        for eta in [2.0, 3.0, 5.0] {
            for drift in [-3.0, -0.5, 0.0, 1.0, 7.5] {
                let psi = -drift / eta;
                let direct = power_deficit_stat(psi, drift);
                let closed = (1.0 / (eta * eta) - 2.0 / eta) * drift * drift;
                assert_relative_eq!(direct, closed, max_relative = 1e-12, epsilon = 1e-12);
                assert!(direct <= 0.0);
            }
        }
    }

    #[test]
    fn lq_cost_worked_example() {
        let w = LQWeights::new(1.0, 1.0).unwrap();
        let cost = lq_cost(&[0.0, 1.0, 1.0], &[0.0, 1.0, 1.0], &w, 2).unwrap();
        assert_eq!(cost, 2.0);
        assert!(LQWeights::new(-1.0, 0.0).is_err());
        assert!(lq_cost(&[0.0], &[0.0], &w, 2).is_err());
    }

    #[test]
    fn vector_privacy_signal_draws_with_cov() {
        let cov = SymmetricMatrix::from_diagonal(&[12.0, 10.0]);
        let src = RandomSource::new(3);
        let mut s = src.stream(0);
        let mut acc = [0.0f64; 2];
        let n = 50_000;
        for _ in 0..n {
            let g = vector_privacy_signal(&cov, &mut s).unwrap();
            acc[0] += g[0] * g[0];
            acc[1] += g[1] * g[1];
        }
        assert!((acc[0] / n as f64 - 12.0).abs() / 12.0 < 0.05);
        assert!((acc[1] / n as f64 - 10.0).abs() / 10.0 < 0.05);
    }

    proptest! {
        #[test]
        fn psi_recurrence_matches_direct_sum(
            a in -2.0f64..2.0,
            gammas in proptest::collection::vec(-3.0f64..3.0, 1..1000),
        ) {
            let mut st = AuthenticatedPolicyState::new(
                ControlPolicy::Zero,
                PrivacySignalSpec::IidGaussian { var: 1.0 },
                a,
            ).unwrap();
            for &g in &gammas {
                authenticated_action(&mut st, 0.0, g);
            }
            // Horner evaluation of Σ a^{k−j} Γ_j
            let mut direct = 0.0;
            for &g in &gammas {
                direct = a * direct + g;
            }
            prop_assert!((st.psi() - direct).abs() <= 1e-9 * (1.0 + st.psi().abs()),
                         "psi {} direct {}", st.psi(), direct);
        }
    }
}
