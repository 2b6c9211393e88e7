//! Sweep orchestration and CSV output.
//!
//! A run evaluates every scheme at every sweep point and writes three files
//! into the output directory:
//!
//! * `aggregate.csv`: one row per (N, scheme) with scenario means;
//! * `scenarios.csv`: one row per (N, scenario, scheme);
//! * `config.toml`: the resolved configuration, seed included.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use crate::config::ExperimentSpec;
use crate::error::{Error, Result};
use crate::sim::{run_experiment, ExperimentResult, Scheme};

pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const SCENARIO_FILE: &str = "scenarios.csv";
pub const CONFIG_FILE: &str = "config.toml";

pub const AGGREGATE_HEADER: &str = "N,scheme,eau_cu,eau_d2d,d2d_sum_rate,outage_fraction,matched_cus,matched_d2d";
pub const SCENARIO_HEADER: &str = "N,scenario,scheme,eau_cu,eau_d2d,d2d_sum_rate,total_payoff,outage_fraction,realized_outage_fraction,matched_cus,matched_d2d";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub n_d2d: usize,
    pub result: ExperimentResult,
}

/// Run `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::invalid("threads", "must be at least 1")),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::invalid("threads", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

pub fn run_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepPoint>> {
    spec.sweep_n_d2d
        .iter()
        .map(|&n| {
            Ok(SweepPoint {
                n_d2d: n,
                result: run_experiment(&spec.config_for(n), &spec.schemes)?,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct AggregateRow {
    #[serde(rename = "N")]
    n: usize,
    scheme: Scheme,
    eau_cu: f64,
    eau_d2d: f64,
    d2d_sum_rate: f64,
    outage_fraction: f64,
    matched_cus: f64,
    matched_d2d: f64,
}

#[derive(Serialize)]
struct ScenarioCsvRow {
    #[serde(rename = "N")]
    n: usize,
    scenario: usize,
    scheme: Scheme,
    eau_cu: f64,
    eau_d2d: f64,
    d2d_sum_rate: f64,
    total_payoff: f64,
    outage_fraction: f64,
    realized_outage_fraction: f64,
    matched_cus: usize,
    matched_d2d: usize,
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn aggregate_csv(points: &[SweepPoint]) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(AGGREGATE_HEADER.split(','))?;
    for p in points {
        for (scheme, m) in &p.result.aggregate {
            w.serialize(AggregateRow {
                n: p.n_d2d,
                scheme: *scheme,
                eau_cu: m.eau_cu.mean,
                eau_d2d: m.eau_d2d.mean,
                d2d_sum_rate: m.d2d_sum_rate.mean,
                outage_fraction: m.outage_fraction.mean,
                matched_cus: m.matched_cus.mean,
                matched_d2d: m.matched_d2d.mean,
            })?;
        }
    }
    finish(w)
}

pub fn scenarios_csv(points: &[SweepPoint]) -> Result<Vec<u8>> {
    let mut w = csv_writer();
    w.write_record(SCENARIO_HEADER.split(','))?;
    for p in points {
        for row in &p.result.rows {
            let m = &row.metrics;
            w.serialize(ScenarioCsvRow {
                n: p.n_d2d,
                scenario: row.scenario,
                scheme: row.scheme,
                eau_cu: m.eau_cu,
                eau_d2d: m.eau_d2d,
                d2d_sum_rate: m.d2d_sum_rate,
                total_payoff: m.total_payoff,
                outage_fraction: m.outage_fraction,
                realized_outage_fraction: m.realized_outage_fraction,
                matched_cus: m.matched_cus,
                matched_d2d: m.matched_d2d,
            })?;
        }
    }
    finish(w)
}

/// Human-readable table of scenario means with standard errors.
pub fn summary_text(points: &[SweepPoint]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>4}  {:<12} {:>16} {:>16} {:>16} {:>8} {:>8}",
        "N", "scheme", "eau_cu", "eau_d2d", "d2d_sum_rate", "outage", "matched"
    );
    for p in points {
        for (scheme, m) in &p.result.aggregate {
            let _ = writeln!(
                out,
                "{:>4}  {:<12} {:>8.3} ± {:<5.3} {:>8.3} ± {:<5.3} {:>8.3} ± {:<5.3} {:>8.3} {:>8.2}",
                p.n_d2d,
                scheme.as_str(),
                m.eau_cu.mean,
                m.eau_cu.std_err,
                m.eau_d2d.mean,
                m.eau_d2d.std_err,
                m.d2d_sum_rate.mean,
                m.d2d_sum_rate.std_err,
                m.outage_fraction.mean,
                m.matched_cus.mean,
            );
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub points: Vec<SweepPoint>,
    pub files: Vec<PathBuf>,
}

/// Run the sweep and write the result files.
pub fn run(spec: &ExperimentSpec, threads: Option<usize>) -> Result<RunOutput> {
    let dir = &spec.output_dir;
    fs::create_dir_all(dir)?;
    let points = with_threads(threads, || run_sweep(spec))??;
    let outputs = [
        (AGGREGATE_FILE, aggregate_csv(&points)?),
        (SCENARIO_FILE, scenarios_csv(&points)?),
        (CONFIG_FILE, spec.resolved_toml().into_bytes()),
    ];
    let mut files = Vec::new();
    for (name, bytes) in outputs {
        let path = dir.join(name);
        fs::write(&path, bytes)?;
        files.push(path);
    }
    Ok(RunOutput { points, files })
}
