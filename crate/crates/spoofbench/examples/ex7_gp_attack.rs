//! Gaussian-process attack on the registered quadratic-sine plant: the GP
//! surrogate against a same-length replay recording, with the information-gain
//! and model-error diagnostics that feed the nonlinear lower bound.
//!
//! GP regression is expensive without optimization — build with `--release`:
//! `cargo run --release --example ex7_gp_attack [trials]`.

use spoofbench::harness::{monte_carlo, ExperimentConfig, RawConfig};
use std::path::Path;

const CONFIG_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");

fn load(name: &str, trials: Option<&str>) -> Result<ExperimentConfig, Box<dyn std::error::Error>> {
    let mut raw = RawConfig::from_file(Path::new(&format!("{CONFIG_DIR}/{name}")))?;
    if let Some(n) = trials {
        raw.set("run.trials", n)?;
    }
    Ok(ExperimentConfig::from_raw(&raw)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials = std::env::args().nth(1);
    let trials = trials.as_deref();

    let gp_cfg = load("ex7-gp.cfg", trials)?;
    let gp = monte_carlo(&gp_cfg, 0)?;
    let replay_cfg = load("ex7-replay.cfg", trials)?;
    let replay = monte_carlo(&replay_cfg, 0)?;

    println!("f(x, u) = x^2 + sin x + u, u = -1.1 y^2, T = 400:");
    println!(
        "  GP, window 100:        p_dec = {:.4} +- {:.4}  ({} valid)",
        gp.p_dec.unwrap_or(f64::NAN),
        gp.stderr.unwrap_or(f64::NAN),
        gp.n_valid,
    );
    println!(
        "  replay, recording 100: p_dec = {:.4} +- {:.4}  ({} valid)",
        replay.p_dec.unwrap_or(f64::NAN),
        replay.stderr.unwrap_or(f64::NAN),
        replay.n_valid,
    );

    // the same diagnostics the sweep's lb_thm4 column aggregates
    let valid = || gp.outcomes.iter().filter(|o| o.valid);
    let gains: Vec<f64> = valid().filter_map(|o| o.info_gain).collect();
    let mean_gain = gains.iter().sum::<f64>() / gains.len().max(1) as f64;
    let n_pass = valid().filter(|o| o.nu_test_pass == Some(true)).count();
    let n_with = valid().filter(|o| o.nu_test_pass.is_some()).count();
    let xis: Vec<f64> = valid().filter_map(|o| o.xi_product).collect();
    let mean_xi = xis.iter().sum::<f64>() / xis.len().max(1) as f64;
    println!("\nmean information gain over the learning window: {mean_gain:.2}");
    println!("model-error test passed in {n_pass} of {n_with} valid trials");
    println!(
        "lower bound from these diagnostics: {:.4}",
        (n_pass as f64 / n_with.max(1) as f64) * mean_xi,
    );
    Ok(())
}
