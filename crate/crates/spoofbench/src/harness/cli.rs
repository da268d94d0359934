//! Batch command-line front end.
//!
//! Four subcommands: `trial` dumps one seeded run in full, `sweep` executes the grid
//! and writes the report, `bounds` prints what the analytic expressions say before a
//! single trial is spent, and `compare` reshapes a sweep into plot-ready long-format
//! rows. Exit codes: 0 success, 1 configuration problem (bad flags, unreadable or
//! invalid config), 2 runtime failure.

use crate::bounds::{deception_lower_bound, ScalarBoundParams};
use crate::detector::false_alarm_bound;
use crate::harness::config::{DetectorKind, ExperimentConfig, RawConfig};
use crate::harness::emit::{emit_report, format_float, long_format_series, ReportFormat};
use crate::harness::sweep::{grid, point_config, sweep};
use crate::harness::trial::{run_trial, trial_seed, ModelEstimate, TrialOutcome};
use crate::harness::HarnessError;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use std::error::Error as _;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "spoofbench",
    version,
    about = "Closed-loop simulation bench for man-in-the-middle attacks on control systems"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one seeded trial and dump the full trajectory
    Trial {
        /// Experiment config file
        #[arg(long, value_name = "path")]
        config: PathBuf,
        /// Override the config's base seed
        #[arg(long, value_name = "u64")]
        seed: Option<u64>,
        /// Write the dump here instead of stdout
        #[arg(long, value_name = "path")]
        out: Option<PathBuf>,
        /// Dump format
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
    /// Run the config's parameter grid and emit the report
    Sweep {
        /// Experiment config file
        #[arg(long, value_name = "path")]
        config: PathBuf,
        /// Override the config's base seed
        #[arg(long, value_name = "u64")]
        seed: Option<u64>,
        /// Override the config's trial count
        #[arg(long, value_name = "n")]
        trials: Option<usize>,
        /// Write the report here instead of stdout
        #[arg(long, value_name = "path")]
        out: Option<PathBuf>,
        /// Report format
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        /// Worker threads (defaults to all cores)
        #[arg(long, value_name = "n")]
        threads: Option<usize>,
    },
    /// Evaluate the analytic bounds from config parameters alone
    Bounds {
        /// Experiment config file
        #[arg(long, value_name = "path")]
        config: PathBuf,
        /// Write the table here instead of stdout
        #[arg(long, value_name = "path")]
        out: Option<PathBuf>,
    },
    /// Run the grid and emit empirical rates and bounds as long-format rows
    Compare {
        /// Experiment config file
        #[arg(long, value_name = "path")]
        config: PathBuf,
        /// Override the config's base seed
        #[arg(long, value_name = "u64")]
        seed: Option<u64>,
        /// Override the config's trial count
        #[arg(long, value_name = "n")]
        trials: Option<usize>,
        /// Write the rows here instead of stdout
        #[arg(long, value_name = "path")]
        out: Option<PathBuf>,
        /// Output format
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
        /// Worker threads (defaults to all cores)
        #[arg(long, value_name = "n")]
        threads: Option<usize>,
    },
}

/// Parse `argv` and run; returns the process exit code (never exits by itself).
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut cause = e.source();
            while let Some(c) = cause {
                eprintln!("  caused by: {c}");
                cause = c.source();
            }
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(), HarnessError> {
    match cmd {
        Cmd::Trial { config, seed, out, format } => {
            let (_, cfg) = load(&config, seed, None)?;
            cmd_trial(&cfg, format.into(), out.as_deref())
        }
        Cmd::Sweep { config, seed, trials, out, format, threads } => {
            let (raw, _) = load(&config, seed, trials)?;
            let report = with_pool(threads, || sweep(&raw))?;
            emit_report(&report, format.into(), out.as_deref())
        }
        Cmd::Bounds { config, out } => {
            let (raw, cfg) = load(&config, None, None)?;
            let table = bounds_table(&raw, &cfg)?;
            write_text(&table, out.as_deref())
        }
        Cmd::Compare { config, seed, trials, out, format, threads } => {
            let (raw, _) = load(&config, seed, trials)?;
            let report = with_pool(threads, || sweep(&raw))?;
            let text = match ReportFormat::from(format) {
                ReportFormat::Csv => {
                    let mut s = String::from("axis_name,axis_value,series,value\n");
                    for row in &report.rows {
                        for (series, value) in long_format_series(row) {
                            let _ = writeln!(
                                s,
                                "{},{},{},{}",
                                row.axis_name,
                                format_float(row.axis_value),
                                series,
                                format_float(value)
                            );
                        }
                    }
                    s
                }
                ReportFormat::Json => {
                    let rows: Vec<serde_json::Value> = report
                        .rows
                        .iter()
                        .flat_map(|row| {
                            long_format_series(row).into_iter().map(|(series, value)| {
                                serde_json::json!({
                                    "axis_name": row.axis_name,
                                    "axis_value": row.axis_value,
                                    "series": series,
                                    "value": value,
                                })
                            })
                        })
                        .collect();
                    let mut s = serde_json::to_string_pretty(&rows)
                        .map_err(|e| HarnessError::Runtime(format!("json serialization failed: {e}")))?;
                    s.push('\n');
                    s
                }
            };
            write_text(&text, out.as_deref())
        }
    }
}

fn load(
    path: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
) -> Result<(RawConfig, ExperimentConfig), HarnessError> {
    let mut raw = RawConfig::from_file(path)?;
    if let Some(s) = seed {
        raw.set("run.seed", &s.to_string())?;
    }
    if let Some(n) = trials {
        raw.set("run.trials", &n.to_string())?;
    }
    let cfg = ExperimentConfig::from_raw(&raw)?;
    Ok((raw, cfg))
}

fn with_pool<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, HarnessError> + Send,
) -> Result<T, HarnessError> {
    match threads {
        None => f(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::Runtime(format!("worker pool: {e}")))?;
            pool.install(f)
        }
    }
}

fn write_text(text: &str, path: Option<&Path>) -> Result<(), HarnessError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| HarnessError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            use std::io::Write as _;
            // a closed pipe (e.g. `spoofbench trial ... | head`) is a normal
            // way for the reader to stop listening, not an error
            match std::io::stdout().write_all(text.as_bytes()) {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => other.map_err(|source| HarnessError::Io {
                    path: "<stdout>".to_string(),
                    source,
                }),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// trial
// ---------------------------------------------------------------------------

fn estimate_label(e: Option<&ModelEstimate>) -> Option<String> {
    e.map(|m| match m {
        ModelEstimate::Scalar(a) => format_float(*a),
        ModelEstimate::Matrix(m) => {
            let rows: Vec<String> = m
                .row_iter()
                .map(|r| r.iter().map(|&v| format_float(v)).collect::<Vec<_>>().join(","))
                .collect();
            rows.join(";")
        }
        ModelEstimate::GpTrained { observations } => format!("gp({observations} observations)"),
    })
}

fn join_components(v: &[f64]) -> String {
    v.iter().map(|&x| format_float(x)).collect::<Vec<_>>().join(";")
}

fn cmd_trial(
    cfg: &ExperimentConfig,
    format: ReportFormat,
    out: Option<&Path>,
) -> Result<(), HarnessError> {
    let seed = trial_seed(cfg.seed, 0, 0);
    let o = run_trial(cfg, seed, true)?;
    let text = match format {
        ReportFormat::Csv => trial_dump_csv(cfg, &o),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&trial_dump_json(cfg, &o))
                .map_err(|e| HarnessError::Runtime(format!("json serialization failed: {e}")))?;
            s.push('\n');
            s
        }
    };
    write_text(&text, out)
}

fn trial_dump_json(cfg: &ExperimentConfig, o: &TrialOutcome) -> serde_json::Value {
    let trajectory = o.trajectory.as_ref().map(|t| {
        serde_json::json!({
            "states": t.states,
            "controls": t.controls,
            "observations": t.observations,
            "disturbances": t.disturbances,
            "hijacked": t.hijacked,
        })
    });
    serde_json::json!({
        "config_hash": cfg.hash,
        "seed": o.seed,
        "gain": o.gain,
        "estimate": estimate_label(o.estimate.as_ref()),
        "valid": o.valid,
        "invalid_reason": o.invalid_reason,
        "statistic": o.statistic,
        "alarm": o.alarm,
        "hijacked": o.hijacked,
        "deceived": o.deceived,
        "diverged_at": o.diverged_at,
        "beta_hat": o.beta_hat,
        "lower_bound_trial": o.lower_bound_trial,
        "pe_event": o.pe_event,
        "info_gain": o.info_gain,
        "lq_cost": o.lq_cost,
        "trajectory": trajectory,
    })
}

fn trial_dump_csv(cfg: &ExperimentConfig, o: &TrialOutcome) -> String {
    let mut s = String::new();
    let mut meta = |k: &str, v: String| {
        let _ = writeln!(s, "# {k} = {v}");
    };
    meta("config_hash", cfg.hash.clone());
    meta("seed", o.seed.to_string());
    if let Some(g) = o.gain {
        meta("gain", format_float(g));
    }
    if let Some(e) = estimate_label(o.estimate.as_ref()) {
        meta("estimate", e);
    }
    meta("valid", o.valid.to_string());
    if let Some(r) = &o.invalid_reason {
        meta("invalid_reason", r.clone());
    }
    if let Some(x) = o.statistic {
        meta("statistic", format_float(x));
    }
    if let Some(a) = o.alarm {
        meta("alarm", a.to_string());
    }
    meta("hijacked", o.hijacked.to_string());
    meta("deceived", o.deceived.to_string());
    if let Some(k) = o.diverged_at {
        meta("diverged_at", k.to_string());
    }
    if let Some(b) = o.beta_hat {
        meta("beta_hat", format_float(b));
    }
    if let Some(c) = o.lq_cost {
        meta("lq_cost", format_float(c));
    }
    let Some(t) = o.trajectory.as_ref() else {
        return s;
    };
    s.push_str("step,state,control,observation,disturbance,hijacked\n");
    for k in 0..t.states.len() {
        let state = join_components(&t.states[k]);
        let control = t.controls.get(k).map(|c| join_components(c)).unwrap_or_default();
        // observations[i] holds Y_{i+1}, disturbances[i] holds W_{i+1}
        let observation = if k >= 1 {
            t.observations.get(k - 1).map(|y| join_components(y)).unwrap_or_default()
        } else {
            String::new()
        };
        let disturbance = if k >= 1 {
            t.disturbances.get(k - 1).map(|w| join_components(w)).unwrap_or_default()
        } else {
            String::new()
        };
        let hijacked = if k >= 1 {
            t.hijacked.get(k - 1).map(|h| h.to_string()).unwrap_or_default()
        } else {
            String::new()
        };
        let _ = writeln!(s, "{k},{state},{control},{observation},{disturbance},{hijacked}");
    }
    s
}

// ---------------------------------------------------------------------------
// bounds
// ---------------------------------------------------------------------------

/// What the closed-form expressions say for each grid point, before any trial runs.
/// Columns that need empirical inputs say so instead of guessing.
fn bounds_table(raw: &RawConfig, base: &ExperimentConfig) -> Result<String, HarnessError> {
    let mut s = String::new();
    let _ = writeln!(s, "analytic bounds (config {})", base.hash);
    let _ = writeln!(s, "column semantics: docs/BOUNDS.md");
    for point in grid(base.sweep.as_ref()) {
        let cfg = point_config(raw, base, &point)?;
        let _ = writeln!(s);
        let _ = writeln!(s, "[{} = {}]", point.axis_name, point.axis_value);
        let window = cfg.attack.window;
        match cfg.detector.kind {
            DetectorKind::Variance { delta } => {
                let noise_var = cfg.plant.scalar_noise_var().expect("variance test is scalar");
                match cfg.bounds.beta {
                    Some(beta) if cfg.attack.active() => {
                        let b = deception_lower_bound(&ScalarBoundParams {
                            delta,
                            beta,
                            window,
                            prior_radius: cfg.bounds.prior_radius.unwrap_or(1.0),
                            noise_var,
                        })?;
                        let clip = if b.clipped() { "  [clipped from raw]" } else { "" };
                        let _ = writeln!(
                            s,
                            "  lb_thm1      = {}  (raw {}, delta {}, beta {}, L {}){}",
                            format_float(b.value),
                            format_float(b.raw),
                            delta,
                            beta,
                            window,
                            clip
                        );
                    }
                    _ => {
                        let _ = writeln!(
                            s,
                            "  lb_thm1      = n/a ({})",
                            if cfg.attack.active() {
                                "set [bounds] beta, or run `sweep` for the per-trial estimate"
                            } else {
                                "no attack configured"
                            }
                        );
                    }
                }
                if let (Some(beta), Some(radius)) = (cfg.bounds.beta, cfg.bounds.prior_radius) {
                    let root = (delta * beta).sqrt();
                    let _ = writeln!(
                        s,
                        "  regime check = sqrt(delta*beta) {} vs prior radius {} ({})",
                        format_float(root),
                        format_float(radius),
                        if root < radius { "upper bounds defined" } else { "out of regime" }
                    );
                    if root < radius {
                        let denom = (radius / root).log2();
                        let _ = writeln!(
                            s,
                            "  info denom   = log2(R/sqrt(delta*beta)) = {}",
                            format_float(denom)
                        );
                    }
                }
                let _ = writeln!(s, "  ub_cor1      = n/a (requires trial data: learning-phase drift moments)");
                let fa = false_alarm_bound(noise_var, delta, cfg.detector.horizon)?;
                let _ = writeln!(
                    s,
                    "  fa_bound     = {}  (sigma^2 {}, delta {}, T {})",
                    format_float(fa),
                    noise_var,
                    delta,
                    cfg.detector.horizon
                );
            }
            DetectorKind::Covariance { gamma } => {
                let _ = writeln!(s, "  lb_thm1      = n/a (scalar variance test only)");
                if let Some(beta) = cfg.bounds.beta {
                    let _ = writeln!(
                        s,
                        "  thm3 event   = mean noise-regressor norm < sqrt(gamma*beta) = {}",
                        format_float((gamma * beta).sqrt())
                    );
                }
                let _ = writeln!(s, "  lb_thm3      = n/a (requires trial data: error-event frequency)");
            }
        }
        if cfg.bounds.chi.is_some() {
            let _ = writeln!(s, "  lb_thm4      = n/a (requires trial data: information gain and model errors)");
        }
    }
    Ok(s)
}
