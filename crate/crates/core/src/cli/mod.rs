//! Command-line front end: sweeps, closed-form bounds and validation runs,
//! each writing `results.csv` and `manifest.json`.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::analysis::bound_report;
use crate::error::{Error, Result};
use crate::simulation::validate::{run_suite, SuiteSize};
use crate::simulation::{sweep, SweepAxis, SweepResult};
pub use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "holocell", version, about = "Holographic-surface cell-free uplink simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config file; omitted keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Trials per point, overriding the config.
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Ergodic sum rate against transmit power.
    SweepPower,
    /// Ergodic sum rate against BS density.
    SweepDensity,
    /// Ergodic sum rate against surface size.
    SweepElements,
    /// Closed-form bounds and integrals, without simulation.
    Bounds,
    /// Statistical and identity checks; fails if any check fails.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::SweepPower => "sweep-power",
            Self::SweepDensity => "sweep-density",
            Self::SweepElements => "sweep-elements",
            Self::Bounds => "bounds",
            Self::Validate => "validate",
        }
    }
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Formats a value with 17 significant digits; non-finite values are left
/// empty.
pub fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

pub const SWEEP_HEADER: [&str; 6] = ["axis_value", "mean_rate", "stderr", "trials", "bound_theorem1", "bound_limit"];

/// Sweep results as CSV text.
pub fn sweep_csv(result: &SweepResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_HEADER)?;
    for p in &result.points {
        w.write_record([
            format_value(p.axis_value),
            format_value(p.mean),
            format_value(p.stderr),
            p.trials.to_string(),
            format_value(p.bound_theorem1),
            format_value(p.bound_limit),
        ])?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn rows_csv(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    finish(w)
}

/// Finite numbers as JSON numbers, others as null.
fn json_number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// Artifacts of one command before they are written.
struct Report {
    csv: String,
    results: Value,
    trials: usize,
    passed: bool,
}

fn run_sweep(cfg: &RunConfig, command: Command) -> Result<Report> {
    let (axis, values): (SweepAxis, Vec<f64>) = match command {
        Command::SweepPower => (SweepAxis::Power, cfg.power_values.clone()),
        Command::SweepDensity => (SweepAxis::Density, cfg.density_values.clone()),
        _ => (SweepAxis::Elements, cfg.elements_values.iter().map(|&n| n as f64).collect()),
    };
    let result = sweep(&cfg.experiment, axis, &values)?;
    println!("{:>14} {:>12} {:>10} {:>12} {:>12}", axis.name(), "mean_rate", "stderr", "bound", "limit");
    for p in &result.points {
        println!(
            "{:>14.6e} {:>12.6} {:>10.2e} {:>12.6} {:>12.6}",
            p.axis_value, p.mean, p.stderr, p.bound_theorem1, p.bound_limit
        );
    }
    let points: Vec<Value> = result
        .points
        .iter()
        .map(|p| {
            json!({
                "axis_value": p.axis_value,
                "mean_rate": p.mean,
                "stderr": p.stderr,
                "trials": p.trials,
                "bound_theorem1": json_number(p.bound_theorem1),
                "bound_limit": json_number(p.bound_limit),
            })
        })
        .collect();
    Ok(Report {
        csv: sweep_csv(&result)?,
        results: json!({ "axis": axis.name(), "points": points }),
        trials: cfg.experiment.trials,
        passed: true,
    })
}

/// Every closed-form quantity as `(name, value)` pairs.
pub fn bound_rows(cfg: &RunConfig) -> Result<Vec<(&'static str, f64)>> {
    let e = &cfg.experiment;
    let r = bound_report(&e.geometry()?, &e.region()?, e.height, &e.operating_point(e.power)?)?;
    Ok(vec![
        ("xi", e.phase_model()?.xi()),
        ("feed_gain_sum", r.feed_gain_sum),
        ("coherent_sum", r.sums.coherent),
        ("incoherent_sum", r.sums.incoherent),
        ("bound_theorem1", r.theorem1),
        ("bound_limit", r.power_limit),
        ("ue_hwi_bound", r.special.ue_hwi),
        ("ue_hwi_limit", r.special.ue_hwi_limit),
        ("bs_hwi_bound", r.special.bs_hwi),
        ("bs_hwi_limit", r.special.bs_hwi_limit),
        ("pse_bound", r.special.pse),
        ("pse_limit", r.special.pse_limit),
        ("zeta", r.zeta),
        ("epsilon", r.epsilon),
        ("bound_infinite_surface", r.infinite_surface),
    ])
}

fn run_bounds(cfg: &RunConfig) -> Result<Report> {
    let rows = bound_rows(cfg)?;
    let mut results = serde_json::Map::new();
    for (name, v) in &rows {
        println!("{name:>24} {}", format_value(*v));
        results.insert(name.to_string(), json_number(*v));
    }
    let table: Vec<Vec<String>> = rows.iter().map(|(n, v)| vec![n.to_string(), format_value(*v)]).collect();
    Ok(Report {
        csv: rows_csv(&["quantity", "value"], &table)?,
        results: Value::Object(results),
        trials: 0,
        passed: true,
    })
}

fn run_validate(cfg: &RunConfig) -> Result<Report> {
    let checks = run_suite(&cfg.experiment, SuiteSize::default(), cfg.experiment.seed)?;
    for c in &checks {
        println!(
            "{} {:<28} value={:.6e} threshold={:.1e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold
        );
    }
    let passed = checks.iter().all(|c| c.passed);
    let table: Vec<Vec<String>> = checks
        .iter()
        .map(|c| vec![c.name.clone(), format_value(c.value), format_value(c.threshold), c.passed.to_string()])
        .collect();
    Ok(Report {
        csv: rows_csv(&["check", "value", "threshold", "passed"], &table)?,
        results: serde_json::to_value(&checks)?,
        trials: 0,
        passed,
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: Value,
    config_sha256: String,
    seed: u64,
    trial_range: [usize; 2],
    started_at: String,
    finished_at: String,
    passed: bool,
    results: &'a Value,
}

fn timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Runs one command against a parsed config and writes its artifacts to
/// `out`. Returns whether every check passed.
pub fn execute(command: Command, cfg: &RunConfig, out: &Path) -> Result<bool> {
    let started_at = timestamp();
    let report = match command {
        Command::Bounds => run_bounds(cfg)?,
        Command::Validate => run_validate(cfg)?,
        _ => run_sweep(cfg, command)?,
    };
    let config = cfg.canonical()?;
    let config_sha256 = hex::encode(Sha256::digest(serde_json::to_string(&config)?.as_bytes()));
    let manifest = Manifest {
        tool: "holocell",
        version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        config,
        config_sha256,
        seed: cfg.experiment.seed,
        trial_range: [0, report.trials],
        started_at,
        finished_at: timestamp(),
        passed: report.passed,
        results: &report.results,
    };
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("results.csv"), &report.csv)?;
    let mut f = std::fs::File::create(out.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n")?;
    Ok(report.passed)
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_path(path).map_err(|e| match e {
            Error::Io(io) => Error::Config {
                key: path.display().to_string(),
                reason: io.to_string(),
            },
            other => other,
        })?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.experiment.trials = trials;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 on success, 1 on a failed check or runtime error, 2 on a usage or
/// config error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match execute(cli.command, &cfg, &cli.out) {
        Ok(true) => EXIT_OK,
        Ok(false) => {
            eprintln!("validation failed");
            EXIT_FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::SweepPoint;

    #[test]
    fn values_have_seventeen_digits() {
        assert_eq!(format_value(0.1), "1.0000000000000001e-1");
        assert_eq!(format_value(f64::INFINITY), "");
        let v: f64 = format_value(std::f64::consts::PI).parse().unwrap();
        assert_eq!(v, std::f64::consts::PI);
    }

    #[test]
    fn sweep_csv_schema() {
        let r = SweepResult {
            axis: SweepAxis::Power,
            points: vec![SweepPoint {
                axis_value: 1.0,
                mean: 2.0,
                stderr: 0.5,
                trials: 30,
                bound_theorem1: 3.0,
                bound_limit: f64::INFINITY,
            }],
        };
        let text = sweep_csv(&r).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), SWEEP_HEADER.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "1.0000000000000000e0,2.0000000000000000e0,5.0000000000000000e-1,30,3.0000000000000000e0,"
        );
    }

    #[test]
    fn ue_impairment_limit_in_bound_rows() {
        let cfg = RunConfig::from_json(r#"{"epsilon_u": 0.99, "nx": 8, "ny": 8}"#).unwrap();
        let rows = bound_rows(&cfg).unwrap();
        let limit = rows.iter().find(|(n, _)| *n == "bound_limit").unwrap().1;
        assert!((limit - 100f64.log2()).abs() < 1e-12);
        assert_eq!(format!("{limit:.4}"), "6.6439");
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["holocell", "no-such-command"]), EXIT_USAGE);
        assert_eq!(run(["holocell", "bounds", "--seed", "x"]), EXIT_USAGE);
        assert_eq!(run(["holocell", "bounds", "--trials", "0"]), EXIT_USAGE);
    }
}
