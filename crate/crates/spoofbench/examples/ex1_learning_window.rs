//! Deception rate versus learning window on the marginally unstable scalar loop,
//! with the replay attack as a baseline.
//!
//! Run with `cargo run --release --example ex1_learning_window [trials]`.

use spoofbench::harness::{monte_carlo, sweep, ExperimentConfig, RawConfig};
use std::path::Path;

const CONFIG_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");

fn load(name: &str, trials: Option<usize>) -> Result<RawConfig, Box<dyn std::error::Error>> {
    let mut raw = RawConfig::from_file(Path::new(&format!("{CONFIG_DIR}/{name}")))?;
    if let Some(n) = trials {
        raw.set("run.trials", &n.to_string())?;
    }
    Ok(raw)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials: Option<usize> = std::env::args().nth(1).map(|s| s.parse()).transpose()?;

    let raw = load("ex1.cfg", trials)?;
    let report = sweep(&raw)?;
    println!("learning attack (a = 1, omega = 0.88, T = 800):");
    println!("{:>8} {:>8} {:>16} {:>12}", "window", "valid", "p_dec +- se", "lower bound");
    for row in &report.rows {
        println!(
            "{:>8} {:>8} {:>9.4} +- {:.4} {:>12.4}",
            row.axis_value,
            row.n_valid,
            row.p_dec.unwrap_or(f64::NAN),
            row.stderr.unwrap_or(f64::NAN),
            row.lb_thm1.unwrap_or(f64::NAN),
        );
    }

    let replay_raw = load("ex1-replay.cfg", trials)?;
    let replay_cfg = ExperimentConfig::from_raw(&replay_raw)?;
    let replay = monte_carlo(&replay_cfg, 0)?;
    println!(
        "\nreplay attack, recording length 20: p_dec = {:.4} +- {:.4}",
        replay.p_dec.unwrap_or(f64::NAN),
        replay.stderr.unwrap_or(f64::NAN),
    );

    let l8 = report.rows[0].p_dec.unwrap_or(f64::NAN);
    println!(
        "learning with window 8 {} the replay attack with a recording 2.5x longer",
        if l8 > replay.p_dec.unwrap_or(f64::NAN) { "beats" } else { "does not beat" },
    );
    Ok(())
}
