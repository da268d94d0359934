//! One seeded closed-loop trial, end to end.
//!
//! Time runs `k = 0..=T`, producing states `X_0..X_{T+1}` and observations
//! `Y_1..Y_{T+1}`. With an attack configured (learning window `L`):
//!
//!  * `k ≤ L`: the true plant advances under the controller's output; the attacker
//!    passively taps `(X_k, U_k)` off the wire and updates its learner on the
//!    transitions `k = 1..L−1`.
//!  * entering `k = L`, the attacker freezes its model and seeds the fictitious
//!    state `V_L = X_L`; from that step on the controller's observation channel
//!    carries `V_{k+1} = model(V_k, U_k) + W̃_k` (or the replayed recording),
//!    while the real plant — from `k = L+1` — is driven by the malicious rule.
//!  * the detector forms residuals `r_k = y_{k+1} − model(y_k, u_k)` for `k = 1..T`
//!    against the *trusted* plant model and issues its verdict at `T`.
//!
//! Noise channels draw from separate deterministic streams (init/plant/fictitious/
//! privacy/gain), so configs that differ only in one mechanism see identical draws
//! everywhere else.

use crate::attacker::{
    default_destabilizing_gain, malicious_input, malicious_input_vector, FictitiousScalar,
    FictitiousVector, GpState, MaliciousActuation, ReplayBuffer, ScalarLSState, VectorLSState,
};
use crate::bounds::{beta_linear, deception_lower_bound, gp_confidence_xi, ScalarBoundParams};
use crate::controller::{
    authenticated_action, control_action, control_action_vector, lq_cost, power_deficit_stat,
    privacy_signal_next, vector_privacy_signal, AuthenticatedPolicyState, ControlPolicy,
    PrivacySignalSpec,
};
use crate::core::{
    gaussian_sample, mix_indices, operator_norm, RandomSource, Stream, SymmetricMatrix,
    Trajectory,
};
use crate::detector::{
    persistent_excitation_check, residual_nonlinear, residual_scalar, residual_vector,
    CovarianceTest, VarianceTest,
};
use crate::harness::config::{
    AttackKind, DetectorKind, ExperimentConfig, MaliciousSpec, PlantSpec,
};
use crate::harness::HarnessError;
use crate::plant::{
    sample_gain, step_nonlinear, step_scalar, step_vector, NonlinearPlant, ScalarPlant,
    VectorPlant, DIVERGENCE_LIMIT,
};
use nalgebra::{DMatrix, DVector};

/// Fictitious-loop divergence threshold: beyond this the trial is invalid (the
/// attacker has visibly lost the plot and the detector comparison is meaningless).
pub const FICTITIOUS_LIMIT: f64 = 1e12;

/// Stable per-trial seed: a SplitMix chain over (base seed, grid index, trial index),
/// so results do not depend on scheduling or execution order.
pub fn trial_seed(base_seed: u64, axis_index: u64, trial_index: u64) -> u64 {
    mix_indices(base_seed, &[axis_index, trial_index])
}

/// The attacker's frozen model, as recorded in the outcome.
#[derive(Clone, Debug)]
pub enum ModelEstimate {
    Scalar(f64),
    Matrix(DMatrix<f64>),
    GpTrained { observations: usize },
}

/// Everything a single trial reports upward. Aggregation-relevant quantities are
/// `Option` so that paths which don't produce them stay silent in reports.
#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub seed: u64,
    /// Sampled scalar plant gain (None for vector/nonlinear plants).
    pub gain: Option<f64>,
    pub estimate: Option<ModelEstimate>,
    /// False when the fictitious loop diverged or the learner degenerated; such
    /// trials carry a diagnostic and are excluded from rates.
    pub valid: bool,
    pub invalid_reason: Option<String>,
    pub statistic: Option<f64>,
    pub alarm: Option<bool>,
    /// Structural hijack indicator: some observation differed from the true state.
    pub hijacked: bool,
    /// Hijacked and no alarm at T.
    pub deceived: bool,
    /// First step at which the *true* plant crossed the divergence limit (damage
    /// metric; does not affect the verdict).
    pub diverged_at: Option<usize>,
    /// Per-trial excitation rate `(1 − (Â−Ω)²)/σ²` (scalar learning + linear gain).
    pub beta_hat: Option<f64>,
    /// Per-trial clipped lower bound evaluated at `beta_hat` (0 when non-stabilizing).
    pub lower_bound_trial: Option<f64>,
    /// `Σ_{k=0}^{L−1} (a·x_k + u_k)²` — drift-power sum feeding the G upper bound.
    pub moment_sum: Option<f64>,
    /// Watermark power-deficit samples `Ψ_k² + 2Ψ_k(a·x̄_k + ū_k)` for `k = 1..=T`.
    pub power_deficit: Vec<f64>,
    /// Whether the scaled learning Gram cleared the configured excitation floor.
    pub pe_event: Option<bool>,
    /// Whether the closed-form estimation-error bound failed while the PE event held
    /// (must never be true; checked by the acceptance suite).
    pub estimation_bound_violated: Option<bool>,
    /// `Σ_k ‖w_k x_kᵀ‖` over the learning window (vector case).
    pub noise_regressor_norm_sum: Option<f64>,
    /// Whether the trial's GP model-error sequence passed the residual-budget test.
    pub nu_test_pass: Option<bool>,
    /// `Π_{hijack steps} (1 − ξ_k)` for the nonlinear lower bound.
    pub xi_product: Option<f64>,
    /// GP information gain ψ over the training set.
    pub info_gain: Option<f64>,
    pub lq_cost: Option<f64>,
    pub trajectory: Option<Trajectory>,
}

impl TrialOutcome {
    fn invalid(seed: u64, gain: Option<f64>, reason: String) -> Self {
        TrialOutcome {
            seed,
            gain,
            estimate: None,
            valid: false,
            invalid_reason: Some(reason),
            statistic: None,
            alarm: None,
            hijacked: true,
            deceived: false,
            diverged_at: None,
            beta_hat: None,
            lower_bound_trial: None,
            moment_sum: None,
            power_deficit: Vec::new(),
            pe_event: None,
            estimation_bound_violated: None,
            noise_regressor_norm_sum: None,
            nu_test_pass: None,
            xi_product: None,
            info_gain: None,
            lq_cost: None,
            trajectory: None,
        }
    }
}

struct TrialStreams {
    init: Stream,
    plant: Stream,
    fictitious: Stream,
    privacy: Stream,
    gain: Stream,
}

fn streams(seed: u64) -> TrialStreams {
    let src = RandomSource::new(seed);
    TrialStreams {
        init: src.stream(0),
        plant: src.stream(1),
        fictitious: src.stream(2),
        privacy: src.stream(3),
        gain: src.stream(4),
    }
}

fn resolve_malicious(spec: &MaliciousSpec, nominal_gain: Option<f64>) -> MaliciousActuation {
    match spec {
        MaliciousSpec::Zero => MaliciousActuation::Zero,
        MaliciousSpec::Gain(mu) => MaliciousActuation::DestabilizeGain { mu: *mu },
        // Without a scalar gain to push against (vector/nonlinear plants), fall back
        // to a fixed positive feedback; the damage metric is qualitative there.
        MaliciousSpec::DefaultGain => MaliciousActuation::DestabilizeGain {
            mu: nominal_gain.map(default_destabilizing_gain).unwrap_or(1.5),
        },
    }
}

/// Run one trial of `cfg` at the given derived seed. `record` keeps the full
/// trajectory on the outcome (used by the CLI's `trial` subcommand).
pub fn run_trial(
    cfg: &ExperimentConfig,
    seed: u64,
    record: bool,
) -> Result<TrialOutcome, HarnessError> {
    match &cfg.plant {
        PlantSpec::Scalar(p) => scalar_trial(cfg, p, seed, record),
        PlantSpec::Vector(p) => vector_trial(cfg, p, seed, record),
        PlantSpec::Nonlinear(p) => nonlinear_trial(cfg, p, seed, record),
    }
}

// ---------------------------------------------------------------------------
// Scalar path
// ---------------------------------------------------------------------------

fn scalar_trial(
    cfg: &ExperimentConfig,
    nominal: &ScalarPlant,
    seed: u64,
    record: bool,
) -> Result<TrialOutcome, HarnessError> {
    let mut st = streams(seed);
    let a = sample_gain(&cfg.gain_prior, &mut st.gain);
    let plant = ScalarPlant::new(a, nominal.noise_var, nominal.init_var)?;
    let horizon = cfg.detector.horizon;
    let window = cfg.attack.window;
    let active = cfg.attack.active();
    let delta = match cfg.detector.kind {
        DetectorKind::Variance { delta } => delta,
        DetectorKind::Covariance { .. } => unreachable!("validated: scalar plants use the variance test"),
    };
    let malicious = resolve_malicious(&cfg.attack.malicious, Some(a));
    let record_deficit = !matches!(cfg.privacy, PrivacySignalSpec::None);

    let mut auth = AuthenticatedPolicyState::new(cfg.policy.clone(), cfg.privacy.clone(), a)?;
    let mut ls = ScalarLSState::new();
    let mut replay = ReplayBuffer::new();
    let mut fict: Option<FictitiousScalar> = None;
    let mut estimate = None;

    let x0 = st.init.normal(0.0, plant.init_var)?;
    let mut xs: Vec<f64> = Vec::with_capacity(horizon + 2);
    xs.push(x0);
    let mut ys: Vec<f64> = Vec::with_capacity(horizon + 1);
    let mut us: Vec<f64> = Vec::with_capacity(horizon + 1);
    us.push(0.0);
    let mut applied: Vec<f64> = Vec::with_capacity(horizon + 1);
    applied.push(0.0);
    let mut ws: Vec<f64> = Vec::with_capacity(horizon);
    let mut hijack_flags: Vec<bool> = Vec::with_capacity(horizon + 1);
    let mut residuals: Vec<f64> = Vec::with_capacity(horizon);
    let mut power_deficit = Vec::new();
    let mut diverged_at: Option<usize> = None;

    // k = 0: U_0 = 0 and W_0 = 0, so X_1 = a·X_0; the first observation is genuine.
    let x1 = step_scalar(&plant, x0, 0.0, 0.0);
    xs.push(x1);
    ys.push(x1);
    hijack_flags.push(false);

    let mut moment_sum = active.then(|| (a * x0).powi(2));

    for k in 1..=horizon {
        if active && k == window {
            match cfg.attack.kind {
                AttackKind::LearnScalar => match ls.estimate() {
                    Ok(a_hat) => {
                        estimate = Some(ModelEstimate::Scalar(a_hat));
                        fict = Some(FictitiousScalar::new(a_hat, plant.noise_var, xs[window]));
                    }
                    Err(e) => {
                        return Ok(TrialOutcome::invalid(
                            seed,
                            Some(a),
                            format!("model estimate failed at the hijack step: {e}"),
                        ))
                    }
                },
                AttackKind::Replay => {}
                _ => unreachable!("validated plant/attack pairing"),
            }
        }

        let y_k = ys[k - 1];
        let xbar = auth.twin_observation(y_k);
        let ubar = auth.base_action(xbar)?;
        let gamma = privacy_signal_next(&auth, xbar, ubar, &mut st.privacy)?;
        let u_k = authenticated_action(&mut auth, ubar, gamma);
        if record_deficit {
            power_deficit.push(power_deficit_stat(auth.psi(), a * xbar + ubar));
        }
        us.push(u_k);

        let plant_in = if active && k > window {
            malicious_input(&malicious, xs[k])
        } else {
            u_k
        };
        applied.push(plant_in);
        let w_k = st.plant.normal(0.0, plant.noise_var)?;
        ws.push(w_k);
        let x_next = if diverged_at.is_some() {
            xs[k] // the wrecked plant is held frozen; only the damage step matters
        } else {
            let xn = step_scalar(&plant, xs[k], plant_in, w_k);
            if !xn.is_finite() || xn.abs() > DIVERGENCE_LIMIT {
                diverged_at = Some(k + 1);
                if xn.is_nan() {
                    DIVERGENCE_LIMIT
                } else {
                    xn.clamp(-DIVERGENCE_LIMIT, DIVERGENCE_LIMIT)
                }
            } else {
                xn
            }
        };
        xs.push(x_next);

        if active && k < window {
            if cfg.attack.kind == AttackKind::LearnScalar {
                ls.update(xs[k], u_k, x_next);
            }
            if let Some(ms) = moment_sum.as_mut() {
                *ms += (a * xs[k] + u_k).powi(2);
            }
        }
        if active && cfg.attack.kind == AttackKind::Replay && k <= window {
            replay.record(&[y_k]);
        }

        let (y_next, hijacked_obs) = if active && k >= window {
            match cfg.attack.kind {
                AttackKind::LearnScalar => {
                    let f = fict.as_mut().expect("model frozen entering the hijack step");
                    let v = f.step(u_k, &mut st.fictitious)?;
                    if !v.is_finite() || v.abs() > FICTITIOUS_LIMIT {
                        return Ok(TrialOutcome::invalid(
                            seed,
                            Some(a),
                            format!("fictitious loop diverged at step {}", k + 1),
                        ));
                    }
                    (v, true)
                }
                AttackKind::Replay => (replay.playback(k + 1)?[0], true),
                _ => unreachable!("validated plant/attack pairing"),
            }
        } else {
            (x_next, false)
        };
        ys.push(y_next);
        hijack_flags.push(hijacked_obs);
        residuals.push(residual_scalar(a, y_k, u_k, y_next));
    }

    let test = VarianceTest::new(plant.noise_var, delta, horizon)?;
    let statistic = test.statistic(&residuals)?;
    let alarm = test.alarms(&residuals)?;
    let hijacked = ys.iter().zip(xs.iter().skip(1)).any(|(y, x)| y != x);
    let deceived = hijacked && !alarm;

    let mut beta_hat = None;
    let mut lower_bound_trial = None;
    if let (Some(ModelEstimate::Scalar(a_hat)), ControlPolicy::LinearGain { omega }) =
        (&estimate, &cfg.policy)
    {
        match beta_linear(*a_hat, *omega, plant.noise_var) {
            Ok(b) => {
                beta_hat = Some(b);
                lower_bound_trial = Some(
                    deception_lower_bound(&ScalarBoundParams {
                        delta,
                        beta: b,
                        window,
                        prior_radius: 1.0,
                        noise_var: plant.noise_var,
                    })?
                    .value,
                );
            }
            Err(_) => lower_bound_trial = Some(0.0), // non-stabilizing estimate: vacuous bound
        }
    }

    let lq = match &cfg.lq {
        Some(w) => Some(lq_cost(&xs[..=horizon], &applied[..=horizon], w, horizon)?),
        None => None,
    };

    let trajectory = record.then(|| Trajectory {
        states: xs.iter().map(|&x| vec![x]).collect(),
        controls: us.iter().map(|&u| vec![u]).collect(),
        observations: ys.iter().map(|&y| vec![y]).collect(),
        disturbances: ws.iter().map(|&w| vec![w]).collect(),
        hijacked: hijack_flags,
    });

    Ok(TrialOutcome {
        seed,
        gain: Some(a),
        estimate,
        valid: true,
        invalid_reason: None,
        statistic: Some(statistic),
        alarm: Some(alarm),
        hijacked,
        deceived,
        diverged_at,
        beta_hat,
        lower_bound_trial,
        moment_sum,
        power_deficit,
        pe_event: None,
        estimation_bound_violated: None,
        noise_regressor_norm_sum: None,
        nu_test_pass: None,
        xi_product: None,
        info_gain: None,
        lq_cost: lq,
        trajectory,
    })
}

// ---------------------------------------------------------------------------
// Vector path
// ---------------------------------------------------------------------------

fn vector_trial(
    cfg: &ExperimentConfig,
    plant: &VectorPlant,
    seed: u64,
    record: bool,
) -> Result<TrialOutcome, HarnessError> {
    let mut st = streams(seed);
    let n = plant.dim();
    let horizon = cfg.detector.horizon;
    let window = cfg.attack.window;
    let active = cfg.attack.active();
    let gamma_threshold = match cfg.detector.kind {
        DetectorKind::Covariance { gamma } => gamma,
        DetectorKind::Variance { .. } => unreachable!("validated: vector plants use the covariance test"),
    };
    let malicious = resolve_malicious(&cfg.attack.malicious, None);
    let privacy_cov = match &cfg.privacy {
        PrivacySignalSpec::IidGaussianVector { cov } => Some(cov),
        PrivacySignalSpec::None => None,
        _ => unreachable!("validated: scalar privacy kinds require a scalar plant"),
    };

    let mut ls = VectorLSState::new(n);
    let mut replay = ReplayBuffer::new();
    let mut fict: Option<FictitiousVector> = None;
    let mut estimate: Option<ModelEstimate> = None;
    let mut sum_wx = DMatrix::<f64>::zeros(n, n);
    let mut sum_wx_norms = 0.0f64;
    let mut pe_event = None;
    let mut estimation_bound_violated = None;

    let zero = DVector::<f64>::zeros(n);
    let x0 = gaussian_sample(&zero, &plant.init_cov, &mut st.init)?;
    let mut xs: Vec<DVector<f64>> = Vec::with_capacity(horizon + 2);
    let mut ys: Vec<DVector<f64>> = Vec::with_capacity(horizon + 1);
    let mut us: Vec<DVector<f64>> = Vec::with_capacity(horizon + 1);
    us.push(zero.clone());
    let mut ws: Vec<DVector<f64>> = Vec::with_capacity(horizon);
    let mut hijack_flags: Vec<bool> = Vec::with_capacity(horizon + 1);
    let mut residuals: Vec<DVector<f64>> = Vec::with_capacity(horizon);
    let mut diverged_at: Option<usize> = None;

    let x1 = step_vector(plant, &x0, &zero, &zero)?;
    xs.push(x0);
    xs.push(x1.clone());
    ys.push(x1);
    hijack_flags.push(false);

    for k in 1..=horizon {
        if active && k == window {
            match cfg.attack.kind {
                AttackKind::LearnVector => {
                    let a_hat = match ls.estimate() {
                        Ok(m) => m,
                        Err(e) => {
                            return Ok(TrialOutcome::invalid(
                                seed,
                                None,
                                format!("model estimate failed at the hijack step: {e}"),
                            ))
                        }
                    };
                    // excitation diagnostics against the configured floor
                    if let Some(zeta) = cfg.bounds.zeta {
                        let gram = SymmetricMatrix::new((&ls.G + ls.G.transpose()) * 0.5)?;
                        let pe = persistent_excitation_check(&gram, window - 1, zeta)?;
                        pe_event = Some(pe);
                        if pe {
                            let err = operator_norm(&(&a_hat - &plant.A));
                            let bound =
                                operator_norm(&sum_wx) / (zeta * (window - 1) as f64);
                            estimation_bound_violated = Some(err > bound + 1e-9);
                        } else {
                            estimation_bound_violated = Some(false);
                        }
                    }
                    fict = Some(FictitiousVector::new(
                        a_hat.clone(),
                        plant.noise_cov.clone(),
                        xs[window].clone(),
                    ));
                    estimate = Some(ModelEstimate::Matrix(a_hat));
                }
                AttackKind::Replay => {}
                _ => unreachable!("validated plant/attack pairing"),
            }
        }

        let y_k = ys[k - 1].clone();
        let mut u_k = control_action_vector(&cfg.policy, &y_k)?;
        if let Some(cov) = privacy_cov {
            u_k += vector_privacy_signal(cov, &mut st.privacy)?;
        }
        us.push(u_k.clone());

        let w_k = gaussian_sample(&zero, &plant.noise_cov, &mut st.plant)?;
        let x_next = if diverged_at.is_some() {
            xs[k].clone()
        } else {
            let plant_in = if active && k > window {
                malicious_input_vector(&malicious, &xs[k])
            } else {
                u_k.clone()
            };
            let xn = step_vector(plant, &xs[k], &plant_in, &w_k)?;
            let worst = xn.amax();
            if !worst.is_finite() || worst > DIVERGENCE_LIMIT {
                diverged_at = Some(k + 1);
                xn.map(|v| {
                    if v.is_nan() {
                        DIVERGENCE_LIMIT
                    } else {
                        v.clamp(-DIVERGENCE_LIMIT, DIVERGENCE_LIMIT)
                    }
                })
            } else {
                xn
            }
        };
        ws.push(w_k.clone());
        xs.push(x_next.clone());

        if active && k < window {
            if cfg.attack.kind == AttackKind::LearnVector {
                ls.update(&xs[k], &us[k], &x_next)?;
                sum_wx += &w_k * xs[k].transpose();
                sum_wx_norms += w_k.norm() * xs[k].norm(); // ‖w xᵀ‖ for rank one
            }
        }
        if active && cfg.attack.kind == AttackKind::Replay && k <= window {
            replay.record(ys[k - 1].as_slice());
        }

        let (y_next, hijacked_obs) = if active && k >= window {
            match cfg.attack.kind {
                AttackKind::LearnVector => {
                    let f = fict.as_mut().expect("model frozen entering the hijack step");
                    let v = f.step(&us[k], &mut st.fictitious)?.clone();
                    let worst = v.amax();
                    if !worst.is_finite() || worst > FICTITIOUS_LIMIT {
                        return Ok(TrialOutcome::invalid(
                            seed,
                            None,
                            format!("fictitious loop diverged at step {}", k + 1),
                        ));
                    }
                    (v, true)
                }
                AttackKind::Replay => {
                    (DVector::from_column_slice(replay.playback(k + 1)?), true)
                }
                _ => unreachable!("validated plant/attack pairing"),
            }
        } else {
            (x_next.clone(), false)
        };
        residuals.push(residual_vector(&plant.A, &y_k, &us[k], &y_next)?);
        ys.push(y_next);
        hijack_flags.push(hijacked_obs);
    }

    let test = CovarianceTest::new(plant.noise_cov.clone(), gamma_threshold, horizon)?;
    let statistic = test.statistic(&residuals)?;
    let alarm = test.alarms(&residuals)?;
    let hijacked = ys.iter().zip(xs.iter().skip(1)).any(|(y, x)| y != x);
    let deceived = hijacked && !alarm;

    let trajectory = record.then(|| Trajectory {
        states: xs.iter().map(|x| x.as_slice().to_vec()).collect(),
        controls: us.iter().map(|u| u.as_slice().to_vec()).collect(),
        observations: ys.iter().map(|y| y.as_slice().to_vec()).collect(),
        disturbances: ws.iter().map(|w| w.as_slice().to_vec()).collect(),
        hijacked: hijack_flags,
    });

    Ok(TrialOutcome {
        seed,
        gain: None,
        estimate,
        valid: true,
        invalid_reason: None,
        statistic: Some(statistic),
        alarm: Some(alarm),
        hijacked,
        deceived,
        diverged_at,
        beta_hat: None,
        lower_bound_trial: None,
        moment_sum: None,
        power_deficit: Vec::new(),
        pe_event,
        estimation_bound_violated,
        noise_regressor_norm_sum: active.then_some(sum_wx_norms),
        nu_test_pass: None,
        xi_product: None,
        info_gain: None,
        lq_cost: None,
        trajectory,
    })
}

// ---------------------------------------------------------------------------
// Nonlinear path
// ---------------------------------------------------------------------------

fn nonlinear_trial(
    cfg: &ExperimentConfig,
    plant: &NonlinearPlant,
    seed: u64,
    record: bool,
) -> Result<TrialOutcome, HarnessError> {
    let mut st = streams(seed);
    let horizon = cfg.detector.horizon;
    let window = cfg.attack.window;
    let active = cfg.attack.active();
    let delta = match cfg.detector.kind {
        DetectorKind::Variance { delta } => delta,
        DetectorKind::Covariance { .. } => unreachable!("validated: scalar-state plants use the variance test"),
    };
    let malicious = resolve_malicious(&cfg.attack.malicious, None);

    let mut gp = GpState::with_kernel(
        cfg.attack.gp_kernel,
        plant.noise_var,
        crate::attacker::GP_TRAINING_CAP,
    );
    let mut replay = ReplayBuffer::new();
    let mut estimate = None;
    let mut fict_v: Option<f64> = None;
    let mut info_gain = None;
    let chi = cfg.bounds.chi;
    let sigma = plant.noise_var.sqrt();
    let mut psi = 0.0;
    let mut nu_sq_sum = 0.0f64;
    let mut w_nu_sum = 0.0f64;
    let mut xi_product: Option<f64> = None;

    let x0 = st.init.normal(0.0, plant.init_var)?;
    let mut xs: Vec<f64> = Vec::with_capacity(horizon + 2);
    xs.push(x0);
    let mut ys: Vec<f64> = Vec::with_capacity(horizon + 1);
    let mut us: Vec<f64> = Vec::with_capacity(horizon + 1);
    us.push(0.0);
    let mut applied: Vec<f64> = Vec::with_capacity(horizon + 1);
    applied.push(0.0);
    let mut ws: Vec<f64> = Vec::with_capacity(horizon);
    let mut hijack_flags: Vec<bool> = Vec::with_capacity(horizon + 1);
    let mut residuals: Vec<f64> = Vec::with_capacity(horizon);
    let mut diverged_at: Option<usize> = None;

    // k = 0: X_1 = f(X_0, 0), the zero-input map with W_0 = 0
    let x1 = step_nonlinear(plant, x0, 0.0, 0.0);
    xs.push(x1);
    ys.push(x1);
    hijack_flags.push(false);

    for k in 1..=horizon {
        if active && k == window {
            match cfg.attack.kind {
                AttackKind::LearnGp => {
                    if let Err(e) = gp.fit() {
                        return Ok(TrialOutcome::invalid(
                            seed,
                            None,
                            format!("model estimate failed at the hijack step: {e}"),
                        ));
                    }
                    estimate = Some(ModelEstimate::GpTrained { observations: gp.len() });
                    if plant.noise_var > 0.0 {
                        psi = gp.info_gain()?;
                        info_gain = Some(psi);
                    }
                    if chi.is_some() {
                        xi_product = Some(1.0);
                    }
                    fict_v = Some(xs[window]);
                }
                AttackKind::Replay => {}
                _ => unreachable!("validated plant/attack pairing"),
            }
        }

        let y_k = ys[k - 1];
        let u_k = control_action(&cfg.policy, y_k)?;
        us.push(u_k);

        let plant_in = if active && k > window {
            malicious_input(&malicious, xs[k])
        } else {
            u_k
        };
        applied.push(plant_in);
        let w_k = st.plant.normal(0.0, plant.noise_var)?;
        ws.push(w_k);
        let x_next = if diverged_at.is_some() {
            xs[k]
        } else {
            let xn = step_nonlinear(plant, xs[k], plant_in, w_k);
            if !xn.is_finite() || xn.abs() > DIVERGENCE_LIMIT {
                diverged_at = Some(k + 1);
                if xn.is_nan() {
                    DIVERGENCE_LIMIT
                } else {
                    xn.clamp(-DIVERGENCE_LIMIT, DIVERGENCE_LIMIT)
                }
            } else {
                xn
            }
        };
        xs.push(x_next);

        if active && k < window && cfg.attack.kind == AttackKind::LearnGp {
            gp.observe(xs[k], u_k, x_next);
        }
        if active && cfg.attack.kind == AttackKind::Replay && k <= window {
            replay.record(&[y_k]);
        }

        let (y_next, hijacked_obs) = if active && k >= window {
            match cfg.attack.kind {
                AttackKind::LearnGp => {
                    let v = fict_v.expect("fictitious state seeded entering the hijack step");
                    let (mean, var) = match gp.posterior(v, u_k) {
                        Ok(mv) => mv,
                        Err(e) => {
                            return Ok(TrialOutcome::invalid(
                                seed,
                                None,
                                format!("GP posterior failed at step {k}: {e}"),
                            ))
                        }
                    };
                    let nu = (plant.drift(v, u_k) - mean).abs();
                    let w_t = st.fictitious.normal(0.0, plant.noise_var)?;
                    nu_sq_sum += nu * nu;
                    w_nu_sum += w_t.abs() * nu;
                    if let (Some(chi), Some(prod)) = (chi, xi_product.as_mut()) {
                        let xi = gp_confidence_xi(psi, chi, sigma, var.sqrt(), nu)?;
                        *prod *= 1.0 - xi;
                    }
                    let v_next = mean + w_t;
                    if !v_next.is_finite() || v_next.abs() > FICTITIOUS_LIMIT {
                        return Ok(TrialOutcome::invalid(
                            seed,
                            None,
                            format!("fictitious loop diverged at step {}", k + 1),
                        ));
                    }
                    fict_v = Some(v_next);
                    (v_next, true)
                }
                AttackKind::Replay => (replay.playback(k + 1)?[0], true),
                _ => unreachable!("validated plant/attack pairing"),
            }
        } else {
            (x_next, false)
        };
        ys.push(y_next);
        hijack_flags.push(hijacked_obs);
        residuals.push(residual_nonlinear(|x, u| plant.drift(x, u), y_k, u_k, y_next));
    }

    let test = VarianceTest::new(plant.noise_var, delta, horizon)?;
    let statistic = test.statistic(&residuals)?;
    let alarm = test.alarms(&residuals)?;
    let hijacked = ys.iter().zip(xs.iter().skip(1)).any(|(y, x)| y != x);
    let deceived = hijacked && !alarm;

    // residual-budget test over the hijack window: (Σν² + 2Σ|W̃|ν)/T ≤ δ
    let nu_test_pass = (active && cfg.attack.kind == AttackKind::LearnGp)
        .then(|| (nu_sq_sum + 2.0 * w_nu_sum) / horizon as f64 <= delta);

    let lq = match &cfg.lq {
        Some(w) => Some(lq_cost(&xs[..=horizon], &applied[..=horizon], w, horizon)?),
        None => None,
    };

    let trajectory = record.then(|| Trajectory {
        states: xs.iter().map(|&x| vec![x]).collect(),
        controls: us.iter().map(|&u| vec![u]).collect(),
        observations: ys.iter().map(|&y| vec![y]).collect(),
        disturbances: ws.iter().map(|&w| vec![w]).collect(),
        hijacked: hijack_flags,
    });

    Ok(TrialOutcome {
        seed,
        gain: None,
        estimate,
        valid: true,
        invalid_reason: None,
        statistic: Some(statistic),
        alarm: Some(alarm),
        hijacked,
        deceived,
        diverged_at,
        beta_hat: None,
        lower_bound_trial: None,
        moment_sum: None,
        power_deficit: Vec::new(),
        pe_event: None,
        estimation_bound_violated: None,
        noise_regressor_norm_sum: None,
        nu_test_pass,
        xi_product,
        info_gain,
        lq_cost: lq,
        trajectory,
    })
}
