//! Effect of an i.i.d. Gaussian watermark on the learning attacker: deception
//! rate over a (watermark variance) x (learning window) grid.
//!
//! Run with `cargo run --release --example ex3_privacy_tradeoff [trials]`.

use spoofbench::harness::{sweep, RawConfig};
use std::path::Path;

const CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/ex3.cfg");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut raw = RawConfig::from_file(Path::new(CONFIG))?;
    if let Some(n) = std::env::args().nth(1) {
        raw.set("run.trials", &n)?;
    }

    let report = sweep(&raw)?;
    // axis_name looks like "controller.privacy_var=9|attack.window"; group the
    // rows into one table line per watermark variance, in grid order
    let mut lines: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let mut windows: Vec<f64> = Vec::new();
    for row in &report.rows {
        let var = row
            .axis_name
            .split('|')
            .next()
            .and_then(|s| s.split('=').nth(1))
            .unwrap_or("?")
            .to_string();
        if !windows.contains(&row.axis_value) {
            windows.push(row.axis_value);
        }
        let cell = (row.axis_value, row.p_dec.unwrap_or(f64::NAN));
        match lines.iter_mut().find(|(v, _)| *v == var) {
            Some((_, cells)) => cells.push(cell),
            None => lines.push((var, vec![cell])),
        }
    }

    println!("p_dec by watermark variance (rows) and learning window (columns):");
    print!("{:>12}", "variance");
    for w in &windows {
        print!(" {:>10}", format!("L = {w}"));
    }
    println!();
    for (var, cells) in &lines {
        print!("{:>12}", var);
        for (_, p) in cells {
            print!(" {:>10.4}", p);
        }
        println!();
    }
    println!("\nstronger watermarks should push every column downward");
    Ok(())
}
