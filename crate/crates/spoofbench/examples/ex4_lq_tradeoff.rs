//! The price of recursive watermarking: quadratic control cost on clean runs
//! against deception probability under attack, for two watermark strengths and
//! the unauthenticated baseline.
//!
//! Run with `cargo run --release --example ex4_lq_tradeoff [trials]`.

use spoofbench::harness::{monte_carlo, ExperimentConfig, RawConfig};
use std::path::Path;

const CONFIG_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");

fn run(name: &str, trials: Option<&str>) -> Result<spoofbench::harness::MonteCarloSummary, Box<dyn std::error::Error>> {
    let mut raw = RawConfig::from_file(Path::new(&format!("{CONFIG_DIR}/{name}")))?;
    if let Some(n) = trials {
        raw.set("run.trials", n)?;
    }
    let cfg = ExperimentConfig::from_raw(&raw)?;
    Ok(monte_carlo(&cfg, 0)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials = std::env::args().nth(1);
    let trials = trials.as_deref();

    let arms = [
        ("eta = 2 (strong)", "ex4-lq.cfg", "ex4-pdec.cfg"),
        ("eta = 5 (weak)", "ex4-lq-eta5.cfg", "ex4-pdec-eta5.cfg"),
        ("unauthenticated", "ex4-lq-unauth.cfg", "ex4-pdec-unauth.cfg"),
    ];

    println!("a = 1, omega = 0.5, q = r = 1, T = 500, learning window 30:");
    println!("{:>18} {:>14} {:>14}", "policy", "LQ cost (clean)", "p_dec (attacked)");
    let mut costs = Vec::new();
    let mut rates = Vec::new();
    for (label, lq_cfg, pdec_cfg) in arms {
        let clean = run(lq_cfg, trials)?;
        let attacked = run(pdec_cfg, trials)?;
        let j = clean.lq_cost_mean.unwrap_or(f64::NAN);
        let p = attacked.p_dec.unwrap_or(f64::NAN);
        println!("{label:>18} {j:>14.4} {p:>14.4}");
        costs.push(j);
        rates.push(p);
    }

    println!(
        "\ncost ordering eta2 > eta5 > unauth: {}",
        if costs[0] > costs[1] && costs[1] > costs[2] { "holds" } else { "does not hold" },
    );
    println!(
        "deception ordering unauth > eta5 > eta2: {}",
        if rates[2] > rates[1] && rates[1] > rates[0] { "holds" } else { "does not hold" },
    );
    println!("(the two orderings moving in opposite directions is the tradeoff)");
    Ok(())
}
