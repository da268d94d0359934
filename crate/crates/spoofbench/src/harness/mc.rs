//! Seeded Monte Carlo aggregation over independent trials.
//!
//! Trials are embarrassingly parallel: each derives its own seed from
//! `(base seed, grid index, trial index)` and owns all of its mutable state, so the
//! collected vector — and every statistic reduced from it in index order — is
//! bit-identical regardless of thread count or scheduling.

use crate::harness::config::ExperimentConfig;
use crate::harness::trial::{run_trial, trial_seed, TrialOutcome};
use crate::harness::HarnessError;
use rayon::prelude::*;

/// Binomial standard error `√(p̂(1−p̂)/n)`.
pub fn binomial_stderr(p_hat: f64, n: usize) -> f64 {
    (p_hat * (1.0 - p_hat) / n as f64).sqrt()
}

/// Aggregated rates over one batch of trials at a single grid point.
///
/// Exactly one of `p_dec` / `p_fa` is populated for any one config: attacked runs
/// measure the deception rate among hijacked trials, clean runs measure the alarm
/// rate among untouched trials. `stderr` is the binomial standard error of
/// whichever rate is present.
#[derive(Clone, Debug)]
pub struct MonteCarloSummary {
    pub n_trials: usize,
    pub n_valid: usize,
    pub p_dec: Option<f64>,
    pub p_fa: Option<f64>,
    pub stderr: Option<f64>,
    pub lq_cost_mean: Option<f64>,
    /// Per-trial outcomes in trial-index order (invalid ones included).
    pub outcomes: Vec<TrialOutcome>,
}

/// Run `cfg.trials` independent trials and aggregate. `axis_index` is the flattened
/// grid-point index (0 outside sweeps); it keeps seeds distinct across grid points.
pub fn monte_carlo(cfg: &ExperimentConfig, axis_index: u64) -> Result<MonteCarloSummary, HarnessError> {
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, trial_seed(cfg.seed, axis_index, i as u64), false))
        .collect::<Result<_, _>>()?;

    let n_valid = outcomes.iter().filter(|o| o.valid).count();
    if n_valid == 0 {
        return Err(HarnessError::NoValidTrials(cfg.trials));
    }

    let mut n_attacked = 0usize;
    let mut n_deceived = 0usize;
    let mut n_clean = 0usize;
    let mut n_false_alarms = 0usize;
    let mut lq_sum = 0.0f64;
    let mut lq_n = 0usize;
    for o in outcomes.iter().filter(|o| o.valid) {
        if o.hijacked {
            n_attacked += 1;
            n_deceived += usize::from(o.deceived);
        } else {
            n_clean += 1;
            n_false_alarms += usize::from(o.alarm == Some(true));
        }
        if let Some(c) = o.lq_cost {
            lq_sum += c;
            lq_n += 1;
        }
    }

    let p_dec = (n_attacked > 0).then(|| n_deceived as f64 / n_attacked as f64);
    let p_fa = (n_clean > 0).then(|| n_false_alarms as f64 / n_clean as f64);
    let stderr = match (p_dec, p_fa) {
        (Some(p), _) => Some(binomial_stderr(p, n_attacked)),
        (None, Some(p)) => Some(binomial_stderr(p, n_clean)),
        (None, None) => None,
    };
    let lq_cost_mean = (lq_n > 0).then(|| lq_sum / lq_n as f64);

    Ok(MonteCarloSummary {
        n_trials: cfg.trials,
        n_valid,
        p_dec,
        p_fa,
        stderr,
        lq_cost_mean,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_text(text).unwrap()
    }

    const NOISELESS: &str = "\
schema_version = 1
[plant]
kind = scalar
a = 0.7
noise_var = 0.0
init_var = 1.0
[controller]
kind = linear
omega = 0.3
[attack]
kind = learn_scalar
window = 10
[detector]
kind = variance
delta = 0.1
horizon = 40
[run]
trials = 25
seed = 12648430
";

    #[test]
    fn all_deceived_gives_rate_one_and_zero_stderr() {
        // noiseless learning is exact, so every trial is a silent hijack
        let s = monte_carlo(&cfg(NOISELESS), 0).unwrap();
        assert_eq!(s.n_valid, 25);
        assert_eq!(s.p_dec, Some(1.0));
        assert_eq!(s.stderr, Some(0.0));
        assert_eq!(s.p_fa, None);
    }

    #[test]
    fn stderr_matches_binomial_formula() {
        assert_eq!(binomial_stderr(0.5, 500), 0.022360679774997897);
        assert_eq!(binomial_stderr(0.0, 10), 0.0);
        assert_eq!(binomial_stderr(1.0, 10), 0.0);
    }

    #[test]
    fn rerun_is_bit_identical() {
        let text = NOISELESS.replace("noise_var = 0.0", "noise_var = 1.0");
        let c = cfg(&text);
        let a = monte_carlo(&c, 3).unwrap();
        let b = monte_carlo(&c, 3).unwrap();
        assert_eq!(a.p_dec.unwrap().to_bits(), b.p_dec.unwrap().to_bits());
        assert_eq!(a.stderr.unwrap().to_bits(), b.stderr.unwrap().to_bits());
        // a different grid index reseeds every trial
        let other = monte_carlo(&c, 4).unwrap();
        let differs = a
            .outcomes
            .iter()
            .zip(other.outcomes.iter())
            .any(|(x, y)| x.statistic != y.statistic);
        assert!(differs);
    }

    #[test]
    fn clean_runs_report_false_alarm_rate_only() {
        let text = NOISELESS
            .replace("kind = learn_scalar\nwindow = 10", "kind = none")
            .replace("noise_var = 0.0", "noise_var = 1.0");
        let s = monte_carlo(&cfg(&text), 0).unwrap();
        assert_eq!(s.p_dec, None);
        let p_fa = s.p_fa.unwrap();
        assert!((0.0..=1.0).contains(&p_fa));
        assert!(s.stderr.is_some());
    }

    #[test]
    fn degenerate_learning_data_in_every_trial_is_an_error() {
        // a = 0 with zero noise collapses the state to 0 from step 1 on, so the
        // learner's window is identically zero in every trial
        let text = NOISELESS
            .replace("a = 0.7", "a = 0.0")
            .replace("omega = 0.3", "omega = 0.0");
        match monte_carlo(&cfg(&text), 0) {
            Err(HarnessError::NoValidTrials(n)) => assert_eq!(n, 25),
            other => panic!("expected NoValidTrials, got {other:?}"),
        }
    }
}
