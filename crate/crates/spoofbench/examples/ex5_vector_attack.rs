//! Matrix least-squares attack on a two-dimensional plant: learning with a
//! 40-step window against replay with a 50-step recording, plus the
//! estimator-based lower bound assembled from the per-trial diagnostics.
//!
//! Run with `cargo run --release --example ex5_vector_attack [trials]`.

use spoofbench::bounds::{vector_lower_bound_estimate, VectorErrorSample};
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

    let cfg = load("ex5-vec.cfg", trials)?;
    let learn = monte_carlo(&cfg, 0)?;
    let replay_cfg = load("ex5-replay.cfg", trials)?;
    let replay = monte_carlo(&replay_cfg, 0)?;

    println!("A = [[1,2],[3,4]], noise diag(1,2), gamma = 0.1, T = 600:");
    println!(
        "  learning, window 40:  p_dec = {:.4} +- {:.4}  ({} valid)",
        learn.p_dec.unwrap_or(f64::NAN),
        learn.stderr.unwrap_or(f64::NAN),
        learn.n_valid,
    );
    println!(
        "  replay, recording 50: p_dec = {:.4} +- {:.4}  ({} valid)",
        replay.p_dec.unwrap_or(f64::NAN),
        replay.stderr.unwrap_or(f64::NAN),
        replay.n_valid,
    );

    // per-trial diagnostics: the persistent-excitation event and the accumulated
    // noise-times-regressor norm feed the estimator-based lower bound
    let samples: Vec<VectorErrorSample> = learn
        .outcomes
        .iter()
        .filter(|o| o.valid)
        .filter_map(|o| {
            o.noise_regressor_norm_sum.map(|s| VectorErrorSample {
                pe_event: o.pe_event.unwrap_or(false),
                noise_regressor_norm_sum: s,
            })
        })
        .collect();
    let pe_count = samples.iter().filter(|s| s.pe_event).count();
    println!(
        "\npersistent excitation held in {} of {} valid trials",
        pe_count,
        samples.len(),
    );
    let lb = vector_lower_bound_estimate(&samples, 0.5, cfg.attack.window, 0.1, 0.29, 0.99)?;
    println!("estimator-based deception lower bound: {lb:.4}");
    Ok(())
}
