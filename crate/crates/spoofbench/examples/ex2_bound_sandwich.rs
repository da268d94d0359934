//! Sandwich of the averaged deception rate between the analytic lower and upper
//! bounds when the plant gain is drawn from a uniform prior.
//!
//! Run with `cargo run --release --example ex2_bound_sandwich [trials]`.

use spoofbench::harness::{sweep, RawConfig};
use std::path::Path;

const CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/ex2.cfg");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut raw = RawConfig::from_file(Path::new(CONFIG))?;
    if let Some(n) = std::env::args().nth(1) {
        raw.set("run.trials", &n)?;
    }

    let report = sweep(&raw)?;
    println!("gain ~ uniform[-0.9, 0.9], omega = 0.045, sigma^2 = 0.16, delta = 0.1:");
    println!(
        "{:>8} {:>8} {:>10} {:>10} {:>10}  sandwich",
        "window", "valid", "lower", "p_dec", "upper"
    );
    let mut all_ok = true;
    for row in &report.rows {
        let (lb, ub) = (row.lb_thm1.unwrap_or(0.0), row.ub_cor1.unwrap_or(1.0));
        let p = row.p_dec.unwrap_or(f64::NAN);
        let ok = lb <= p && p <= ub;
        all_ok &= ok;
        println!(
            "{:>8} {:>8} {:>10.4} {:>10.4} {:>10.4}  {}",
            row.axis_value,
            row.n_valid,
            lb,
            p,
            ub,
            if ok { "ok" } else { "VIOLATED" },
        );
    }
    println!(
        "\n{}",
        if all_ok {
            "every grid point sits between the bounds"
        } else {
            "some grid point escaped the sandwich"
        }
    );
    Ok(())
}
