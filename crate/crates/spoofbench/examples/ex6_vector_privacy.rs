//! Vector watermarking head-to-head: deception rate of the matrix LS attacker
//! against the watermarked and plain deadbeat loops across detection horizons.
//!
//! Run with `cargo run --release --example ex6_vector_privacy [trials]`.

use spoofbench::harness::{sweep, RawConfig};
use std::path::Path;

const CONFIG_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");

fn run(name: &str, trials: Option<&str>) -> Result<spoofbench::harness::SweepReport, Box<dyn std::error::Error>> {
    let mut raw = RawConfig::from_file(Path::new(&format!("{CONFIG_DIR}/{name}")))?;
    if let Some(n) = trials {
        raw.set("run.trials", n)?;
    }
    Ok(sweep(&raw)?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trials = std::env::args().nth(1);
    let trials = trials.as_deref();

    let auth = run("ex6-vec-privacy.cfg", trials)?;
    let plain = run("ex6-unauth.cfg", trials)?;

    println!("deadbeat matrix policy, watermark covariance diag(12, 10):");
    println!(
        "{:>8} {:>16} {:>16} {:>10}",
        "T", "p_dec marked", "p_dec plain", "gap"
    );
    for (a, p) in auth.rows.iter().zip(&plain.rows) {
        let (pa, pp) = (a.p_dec.unwrap_or(f64::NAN), p.p_dec.unwrap_or(f64::NAN));
        println!("{:>8} {:>16.4} {:>16.4} {:>+10.4}", a.axis_value, pa, pp, pp - pa);
    }
    println!("\na positive gap means the watermark hurt the attacker at that horizon");
    Ok(())
}
