//! Parameter-grid execution: one Monte Carlo batch plus the applicable analytic
//! bound columns per grid point.
//!
//! A grid point is realized by cloning the raw config, overwriting the axis keys
//! with the values exactly as written, and re-validating the result — so a sweep
//! can move any `section.key` the grammar knows, and an inconsistent point fails
//! with the same error a hand-written config would. The emitted `config_hash` is
//! the hash of the *base* config: one sweep, one identity.

use crate::bounds::{
    deception_lower_bound, g_upper_bound, vector_lower_bound_estimate, ScalarBoundParams,
    VectorErrorSample,
};
use crate::harness::config::{
    AttackKind, DetectorKind, ExperimentConfig, RawConfig, SweepSpec, SCHEMA_VERSION,
};
use crate::harness::mc::{monte_carlo, MonteCarloSummary};
use crate::harness::HarnessError;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// One grid point's aggregates, in emission order.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub axis_name: String,
    pub axis_value: f64,
    pub n_trials: usize,
    pub n_valid: usize,
    pub p_dec: Option<f64>,
    pub stderr: Option<f64>,
    pub p_fa: Option<f64>,
    pub lb_thm1: Option<f64>,
    pub ub_cor1: Option<f64>,
    pub lb_thm3: Option<f64>,
    pub lb_thm4: Option<f64>,
    pub lq_cost_mean: Option<f64>,
    pub config_hash: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SweepReport {
    pub schema_version: u64,
    pub config_hash: String,
    pub wall_time_s: f64,
    pub rows: Vec<SweepRow>,
}

pub(crate) struct GridPoint {
    pub(crate) axis_name: String,
    pub(crate) axis_value: f64,
    pub(crate) overrides: Vec<(String, String)>,
    pub(crate) flat_index: u64,
}

pub(crate) fn grid(spec: Option<&SweepSpec>) -> Vec<GridPoint> {
    let Some(s) = spec else {
        return vec![GridPoint {
            axis_name: "none".into(),
            axis_value: 0.0,
            overrides: Vec::new(),
            flat_index: 0,
        }];
    };
    match &s.outer {
        None => s
            .axis
            .values
            .iter()
            .enumerate()
            .map(|(i, (text, num))| GridPoint {
                axis_name: s.axis.key.clone(),
                axis_value: *num,
                overrides: vec![(s.axis.key.clone(), text.clone())],
                flat_index: i as u64,
            })
            .collect(),
        Some(outer) => {
            let inner_len = s.axis.values.len();
            let mut points = Vec::with_capacity(outer.values.len() * inner_len);
            for (oi, (otext, _)) in outer.values.iter().enumerate() {
                for (ii, (itext, inum)) in s.axis.values.iter().enumerate() {
                    points.push(GridPoint {
                        axis_name: format!("{}={}|{}", outer.key, otext, s.axis.key),
                        axis_value: *inum,
                        overrides: vec![
                            (outer.key.clone(), otext.clone()),
                            (s.axis.key.clone(), itext.clone()),
                        ],
                        flat_index: (oi * inner_len + ii) as u64,
                    });
                }
            }
            points
        }
    }
}

/// Resolve one grid point into a validated config (the base config when the point
/// carries no overrides).
pub(crate) fn point_config(
    raw: &RawConfig,
    base: &ExperimentConfig,
    point: &GridPoint,
) -> Result<ExperimentConfig, HarnessError> {
    if point.overrides.is_empty() {
        return Ok(base.clone());
    }
    let mut r = raw.clone();
    for (key, value) in &point.overrides {
        r.set(key, value)?;
    }
    Ok(ExperimentConfig::from_raw(&r)?)
}

/// Run the full grid of `raw` (a single point when no `[sweep]` section is given).
pub fn sweep(raw: &RawConfig) -> Result<SweepReport, HarnessError> {
    let base = ExperimentConfig::from_raw(raw)?;
    let start = Instant::now();
    let mut rows = Vec::new();
    for point in grid(base.sweep.as_ref()) {
        let cfg = point_config(raw, &base, &point)?;
        let summary = monte_carlo(&cfg, point.flat_index)?;
        let (lb_thm1, ub_cor1, lb_thm3, lb_thm4) = bound_columns(&cfg, &summary)?;
        rows.push(SweepRow {
            axis_name: point.axis_name,
            axis_value: point.axis_value,
            n_trials: summary.n_trials,
            n_valid: summary.n_valid,
            p_dec: summary.p_dec,
            stderr: summary.stderr,
            p_fa: summary.p_fa,
            lb_thm1,
            ub_cor1,
            lb_thm3,
            lb_thm4,
            lq_cost_mean: summary.lq_cost_mean,
            config_hash: base.hash.clone(),
        });
    }
    Ok(SweepReport {
        schema_version: SCHEMA_VERSION,
        config_hash: base.hash.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
        rows,
    })
}

type BoundColumns = (Option<f64>, Option<f64>, Option<f64>, Option<f64>);

/// Evaluate whichever analytic bound columns this config's parameters support
/// (see `docs/BOUNDS.md` for the statements and their inputs).
fn bound_columns(
    cfg: &ExperimentConfig,
    summary: &MonteCarloSummary,
) -> Result<BoundColumns, HarnessError> {
    let mut lb_thm1 = None;
    let mut ub_cor1 = None;
    let mut lb_thm3 = None;
    let mut lb_thm4 = None;
    if !cfg.attack.active() {
        return Ok((None, None, None, None));
    }
    let window = cfg.attack.window;
    let valid = || summary.outcomes.iter().filter(|o| o.valid);

    match cfg.attack.kind {
        AttackKind::LearnScalar => {
            let DetectorKind::Variance { delta } = cfg.detector.kind else {
                return Ok((None, None, None, None));
            };
            let noise_var = cfg.plant.scalar_noise_var().expect("scalar attack on scalar plant");
            if let Some(beta) = cfg.bounds.beta {
                // pinned excitation rate: one analytic value for the whole point
                lb_thm1 = Some(
                    deception_lower_bound(&ScalarBoundParams {
                        delta,
                        beta,
                        window,
                        prior_radius: cfg.bounds.prior_radius.unwrap_or(1.0),
                        noise_var,
                    })?
                    .value,
                );
            } else {
                // per-trial rate from the trial's own estimate, averaged
                let vals: Vec<f64> = valid().filter_map(|o| o.lower_bound_trial).collect();
                if !vals.is_empty() {
                    lb_thm1 = Some(vals.iter().sum::<f64>() / vals.len() as f64);
                }
            }
            if let (Some(beta), Some(prior_radius)) = (cfg.bounds.beta, cfg.bounds.prior_radius) {
                let moments: Vec<f64> = valid().filter_map(|o| o.moment_sum).collect();
                if !moments.is_empty() {
                    let avg = moments.iter().sum::<f64>() / moments.len() as f64;
                    let params = ScalarBoundParams {
                        delta,
                        beta,
                        window,
                        prior_radius,
                        noise_var,
                    };
                    // out-of-regime parameters leave the column empty rather than
                    // emitting a bound whose hypotheses fail
                    ub_cor1 = g_upper_bound(avg, &params).ok().map(|b| b.value);
                }
            }
        }
        AttackKind::LearnVector => {
            if let (DetectorKind::Covariance { gamma }, Some(zeta), Some(rho), Some(beta)) =
                (cfg.detector.kind, cfg.bounds.zeta, cfg.bounds.rho, cfg.bounds.beta)
            {
                let samples: Vec<VectorErrorSample> = valid()
                    .filter_map(|o| {
                        o.noise_regressor_norm_sum.map(|s| VectorErrorSample {
                            pe_event: o.pe_event.unwrap_or(false),
                            noise_regressor_norm_sum: s,
                        })
                    })
                    .collect();
                if !samples.is_empty() {
                    lb_thm3 =
                        Some(vector_lower_bound_estimate(&samples, zeta, window, gamma, beta, rho)?);
                }
            }
        }
        AttackKind::LearnGp => {
            if cfg.bounds.chi.is_some() {
                let mut n = 0usize;
                let mut n_pass = 0usize;
                let mut xi_sum = 0.0f64;
                let mut xi_n = 0usize;
                for o in valid() {
                    if let Some(pass) = o.nu_test_pass {
                        n += 1;
                        n_pass += usize::from(pass);
                    }
                    if let Some(prod) = o.xi_product {
                        xi_sum += prod;
                        xi_n += 1;
                    }
                }
                if n > 0 && xi_n > 0 {
                    let p_bar = n_pass as f64 / n as f64;
                    lb_thm4 = Some(p_bar * (xi_sum / xi_n as f64));
                }
            }
        }
        AttackKind::Replay | AttackKind::None => {}
    }
    Ok((lb_thm1, ub_cor1, lb_thm3, lb_thm4))
}
