//! Cross-module invariants of the simulation pipeline: hijack bookkeeping,
//! verdict partitioning, false-alarm control, and order independence.

use spoofbench::detector::false_alarm_bound;
use spoofbench::harness::{
    monte_carlo, run_trial, sweep, trial_seed, ExperimentConfig, RawConfig,
};
use std::path::Path;

const CONFIG_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");

fn load(name: &str) -> RawConfig {
    RawConfig::from_file(Path::new(&format!("{CONFIG_DIR}/{name}"))).expect(name)
}

fn config_with_trials(name: &str, trials: &str) -> ExperimentConfig {
    let mut raw = load(name);
    raw.set("run.trials", trials).unwrap();
    ExperimentConfig::from_raw(&raw).unwrap()
}

/// The per-step hijack flags and the outcome-level indicator must tell the
/// same story: nothing hijacked before the learning window closes, the flag
/// set iff some later observation was substituted.
#[test]
fn hijack_flags_agree_with_the_outcome() {
    let cfg = config_with_trials("ex1.cfg", "30");
    let window = cfg.attack.window;
    for i in 0..30u64 {
        let out = run_trial(&cfg, trial_seed(cfg.seed, 0, i), true).unwrap();
        let flags = &out.trajectory.as_ref().unwrap().hijacked;
        assert_eq!(flags.iter().any(|&h| h), out.hijacked, "trial {i}");
        assert!(
            flags[..window].iter().all(|&h| !h),
            "trial {i}: observation replaced during the passive phase"
        );
        if out.valid {
            assert!(out.hijacked, "trial {i}: attacked run never hijacked");
            assert!(flags[window..].iter().any(|&h| h));
        }
    }
}

#[test]
fn clean_runs_never_set_hijack_flags() {
    let cfg = config_with_trials("ex1-noattack.cfg", "20");
    for i in 0..20u64 {
        let out = run_trial(&cfg, trial_seed(cfg.seed, 0, i), true).unwrap();
        assert!(!out.hijacked);
        assert!(!out.deceived);
        let flags = &out.trajectory.as_ref().unwrap().hijacked;
        assert!(flags.iter().all(|&h| !h));
    }
}

/// Every valid hijacked trial ends in exactly one verdict: alarm or deception.
#[test]
fn alarm_and_deception_partition_hijacked_trials() {
    let cfg = config_with_trials("ex1.cfg", "200");
    let summary = monte_carlo(&cfg, 0).unwrap();

    let mut hijacked_valid = 0usize;
    let mut deceived = 0usize;
    let mut alarmed = 0usize;
    for out in &summary.outcomes {
        if !out.valid {
            continue;
        }
        let alarm = out.alarm.expect("valid trial must carry a verdict");
        assert_eq!(out.deceived, out.hijacked && !alarm);
        if out.hijacked {
            hijacked_valid += 1;
            if alarm {
                alarmed += 1;
            } else {
                deceived += 1;
            }
        }
    }
    assert!(hijacked_valid > 0);
    assert_eq!(deceived + alarmed, hijacked_valid);

    let p = summary.p_dec.unwrap();
    assert_eq!(p, deceived as f64 / hijacked_valid as f64);
    let se = summary.stderr.unwrap();
    assert_eq!(se, (p * (1.0 - p) / hijacked_valid as f64).sqrt());
    assert!(summary.p_fa.is_none(), "attacked run must not report a false-alarm rate");
}

#[test]
fn clean_summary_reports_false_alarms_only() {
    let cfg = config_with_trials("ex1-noattack.cfg", "150");
    let summary = monte_carlo(&cfg, 0).unwrap();
    assert!(summary.p_dec.is_none());
    let p_fa = summary.p_fa.unwrap();
    let alarms = summary
        .outcomes
        .iter()
        .filter(|o| o.valid && o.alarm == Some(true))
        .count();
    assert_eq!(p_fa, alarms as f64 / summary.n_valid as f64);
}

/// Empirical false-alarm rates sit under the closed-form tail bound at every
/// horizon in the clean sweep (3-sigma Monte-Carlo allowance).
#[test]
fn false_alarm_rate_stays_under_the_analytic_bound() {
    let mut raw = load("ex1-noattack.cfg");
    raw.set("run.trials", "400").unwrap();
    let report = sweep(&raw).unwrap();
    assert_eq!(report.rows.len(), 3);
    for row in &report.rows {
        let horizon = row.axis_value as usize;
        let bound = false_alarm_bound(1.0, 0.1, horizon).unwrap();
        let p_fa = row.p_fa.unwrap();
        let se = row.stderr.unwrap();
        assert!(
            p_fa <= bound + 3.0 * se,
            "T={horizon}: p_fa {p_fa} above bound {bound} (se {se})"
        );
    }
}

/// Trial outcomes are a pure function of (base seed, axis index, trial index);
/// running them in a different order changes nothing.
#[test]
fn execution_order_does_not_affect_outcomes() {
    let cfg = config_with_trials("ex1.cfg", "24");
    let n = 24u64;

    let in_order: Vec<_> =
        (0..n).map(|i| run_trial(&cfg, trial_seed(cfg.seed, 0, i), false).unwrap()).collect();

    // stride-7 permutation of 0..24 (gcd(7,24)=1 so it visits every index)
    let mut shuffled: Vec<Option<spoofbench::harness::TrialOutcome>> =
        (0..n).map(|_| None).collect();
    for j in 0..n {
        let i = (j * 7) % n;
        shuffled[i as usize] = Some(run_trial(&cfg, trial_seed(cfg.seed, 0, i), false).unwrap());
    }

    for (i, (a, b)) in in_order.iter().zip(shuffled.iter()).enumerate() {
        let b = b.as_ref().unwrap();
        assert_eq!(a.valid, b.valid, "trial {i}");
        assert_eq!(a.deceived, b.deceived, "trial {i}");
        assert_eq!(
            a.statistic.map(f64::to_bits),
            b.statistic.map(f64::to_bits),
            "trial {i}"
        );
        assert_eq!(a.gain.map(f64::to_bits), b.gain.map(f64::to_bits), "trial {i}");
    }
}

/// Distinct trials draw distinct randomness: no two seeds collide and the
/// sampled initial states differ across a modest batch.
#[test]
fn trials_are_not_replicas_of_each_other() {
    let cfg = config_with_trials("ex1.cfg", "40");
    let mut seeds = std::collections::HashSet::new();
    let mut first_states = std::collections::HashSet::new();
    for i in 0..40u64 {
        let s = trial_seed(cfg.seed, 0, i);
        assert!(seeds.insert(s), "seed collision at trial {i}");
        let out = run_trial(&cfg, s, true).unwrap();
        let x0 = out.trajectory.as_ref().unwrap().states[0][0];
        first_states.insert(x0.to_bits());
    }
    assert_eq!(first_states.len(), 40, "initial states repeat across trials");
}
