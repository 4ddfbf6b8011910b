//! Seeded Monte Carlo experiments over independent walks.
//!
//! Run `r` of an experiment draws from `stream(master_seed, r)`, so results
//! do not depend on thread count or scheduling. The per-run CSV is the
//! canonical record; every aggregate in [`ExperimentReport`] can be
//! recomputed from it with [`summarize`].

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enumeration::brute_force_min_discrepancy;
use crate::enumeration::BRUTE_FORCE_MAX_N;
use crate::error::{GswError, Result};
use crate::inequalities::{theorem1_bound, BoundInputs};
use crate::instance::Instance;
use crate::ortho::{coordinate_z, OrthoTrace};
use crate::rng::stream;
use crate::walk::run_walk;

/// Thresholds used for the tail table of a report.
pub const DEFAULT_TAIL_GRID: [f64; 4] = [0.5, 1.0, 2.0, 3.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStats {
    pub run_index: u64,
    pub discrepancy: f64,
    pub hat_t: usize,
    pub max_z: f64,
    pub z_values: Vec<f64>,
    pub final_x: Vec<i8>,
}

/// One walk with its statistics.
pub fn run_once(inst: &Instance, master_seed: u64, run_index: u64) -> Result<RunStats> {
    let mut rng = stream(master_seed, run_index);
    let trace = run_walk(inst, &mut rng)?;
    let ortho = OrthoTrace::build(inst, &trace)?;
    let z_values = coordinate_z(inst, &ortho);
    Ok(RunStats {
        run_index,
        discrepancy: inst.discrepancy(&trace.final_x),
        hat_t: ortho.hat_t,
        max_z: z_values.iter().copied().fold(0.0, f64::max),
        z_values,
        final_x: trace.final_x,
    })
}

/// `runs` independent walks, in run order.
pub fn run_experiment(inst: &Instance, runs: usize, master_seed: u64) -> Result<Vec<RunStats>> {
    if runs == 0 {
        return Err(GswError::InvalidArgument("runs must be >= 1".into()));
    }
    (0..runs as u64)
        .into_par_iter()
        .map(|r| run_once(inst, master_seed, r))
        .collect()
}

/// Sample mean and its standard error.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// The bound `2 max(1, √(2 E max Z) √(ln E T̂))` with sample means, and
/// whether some run achieved it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundEstimate {
    pub mean_hat_t: f64,
    pub mean_max_z: f64,
    pub bound: f64,
    pub min_discrepancy: f64,
    pub existence: bool,
}

pub fn estimate_bound(stats: &[RunStats]) -> Result<BoundEstimate> {
    if stats.is_empty() {
        return Err(GswError::InvalidArgument("no runs to estimate from".into()));
    }
    let hat_t: Vec<f64> = stats.iter().map(|s| s.hat_t as f64).collect();
    let max_z: Vec<f64> = stats.iter().map(|s| s.max_z).collect();
    let min_discrepancy = stats.iter().map(|s| s.discrepancy).fold(f64::INFINITY, f64::min);
    bound_from_means(mean_se(&hat_t).0, mean_se(&max_z).0, min_discrepancy)
}

fn bound_from_means(mean_hat_t: f64, mean_max_z: f64, min_discrepancy: f64) -> Result<BoundEstimate> {
    // T̂ = 0 on every run only when M = 0; the bound is then 2.
    let inputs = BoundInputs::new(mean_max_z.min(1.0), mean_hat_t.max(1.0))?;
    let bound = theorem1_bound(inputs);
    Ok(BoundEstimate {
        mean_hat_t,
        mean_max_z,
        bound,
        min_discrepancy,
        existence: min_discrepancy <= bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub coordinate: usize,
    pub c: f64,
    pub empirical: f64,
    pub bound: f64,
    /// Binomial standard error of `empirical`.
    pub se: f64,
}

impl TailRow {
    /// Whether the empirical exceedance is within `k` standard errors of the
    /// bound.
    pub fn within(&self, k: f64) -> bool {
        self.empirical <= self.bound + k * self.se
    }
}

/// Empirical `P(|⟨M X, e_i⟩| > c)` against `2 e^{−c²/2}`.
pub fn empirical_tail(inst: &Instance, stats: &[RunStats], i: usize, c_grid: &[f64]) -> Result<Vec<TailRow>> {
    if i >= inst.d() {
        return Err(GswError::InvalidArgument(format!("coordinate {i} out of range for d = {}", inst.d())));
    }
    let values: Vec<f64> = stats.iter().map(|s| inst.apply_signs(&s.final_x)[i].abs()).collect();
    Ok(tail_rows(i, &values, c_grid))
}

fn tail_rows(i: usize, values: &[f64], c_grid: &[f64]) -> Vec<TailRow> {
    let n = values.len() as f64;
    c_grid
        .iter()
        .map(|&c| {
            let p = values.iter().filter(|&&v| v > c).count() as f64 / n;
            TailRow {
                coordinate: i,
                c,
                empirical: p,
                bound: 2.0 * (-0.5 * c * c).exp(),
                se: (p * (1.0 - p) / n).sqrt(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub d: usize,
    pub n: usize,
    pub kind: Option<String>,
    pub seed: Option<u64>,
    pub path: Option<String>,
}

impl InstanceDescriptor {
    pub fn of(inst: &Instance) -> Self {
        InstanceDescriptor {
            d: inst.d(),
            n: inst.n(),
            kind: None,
            seed: None,
            path: None,
        }
    }
}

/// Aggregates that depend only on the per-run CSV columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    #[serde(rename = "mean_hatT")]
    pub mean_hat_t: f64,
    #[serde(rename = "se_hatT")]
    pub se_hat_t: f64,
    #[serde(rename = "mean_maxZ")]
    pub mean_max_z: f64,
    #[serde(rename = "se_maxZ")]
    pub se_max_z: f64,
    pub theorem1_bound: f64,
    pub min_disc: f64,
    pub mean_disc: f64,
    pub max_disc: f64,
    pub frac_within_bound: f64,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub run_index: u64,
    pub discrepancy: f64,
    pub hat_t: usize,
    pub max_z: f64,
    pub final_x: Vec<i8>,
}

impl From<&RunStats> for RunRow {
    fn from(s: &RunStats) -> Self {
        RunRow {
            run_index: s.run_index,
            discrepancy: s.discrepancy,
            hat_t: s.hat_t,
            max_z: s.max_z,
            final_x: s.final_x.clone(),
        }
    }
}

pub fn summarize(rows: &[RunRow]) -> Result<Summary> {
    if rows.is_empty() {
        return Err(GswError::InvalidArgument("no runs to summarize".into()));
    }
    let hat_t: Vec<f64> = rows.iter().map(|r| r.hat_t as f64).collect();
    let max_z: Vec<f64> = rows.iter().map(|r| r.max_z).collect();
    let disc: Vec<f64> = rows.iter().map(|r| r.discrepancy).collect();
    let (mean_hat_t, se_hat_t) = mean_se(&hat_t);
    let (mean_max_z, se_max_z) = mean_se(&max_z);
    let min_disc = disc.iter().copied().fold(f64::INFINITY, f64::min);
    let max_disc = disc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bound = bound_from_means(mean_hat_t, mean_max_z, min_disc)?.bound;
    Ok(Summary {
        runs: rows.len(),
        mean_hat_t,
        se_hat_t,
        mean_max_z,
        se_max_z,
        theorem1_bound: bound,
        min_disc,
        mean_disc: mean_se(&disc).0,
        max_disc,
        frac_within_bound: disc.iter().filter(|&&v| v <= bound).count() as f64 / rows.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub instance: InstanceDescriptor,
    pub master_seed: u64,
    /// Where the seed came from: `flag`, `env` or `default`.
    pub seed_source: Option<String>,
    #[serde(flatten)]
    pub summary: Summary,
    pub brute_force_opt: Option<f64>,
    pub tail: Vec<TailRow>,
    #[serde(skip)]
    pub rows: Vec<RunRow>,
}

/// Aggregates `stats` into a report. The brute-force optimum is included
/// when `n` is small enough.
pub fn build_report(
    inst: &Instance,
    instance: InstanceDescriptor,
    stats: &[RunStats],
    master_seed: u64,
) -> Result<ExperimentReport> {
    let rows: Vec<RunRow> = stats.iter().map(RunRow::from).collect();
    let summary = summarize(&rows)?;
    let brute_force_opt = if inst.n() <= BRUTE_FORCE_MAX_N {
        Some(brute_force_min_discrepancy(inst)?.0)
    } else {
        None
    };
    let mut tail = Vec::new();
    for i in 0..inst.d() {
        tail.extend(empirical_tail(inst, stats, i, &DEFAULT_TAIL_GRID)?);
    }
    Ok(ExperimentReport {
        instance,
        master_seed,
        seed_source: None,
        summary,
        brute_force_opt,
        tail,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl ReportFormat {
    /// Guesses the format from a file extension, defaulting to JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => ReportFormat::Csv,
            _ => ReportFormat::Json,
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        })
    }
}

impl FromStr for ReportFormat {
    type Err = GswError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(GswError::InvalidArgument(format!("unknown format {other:?} (json or csv)"))),
        }
    }
}

const CSV_HEADER: [&str; 5] = ["run_index", "discrepancy", "hatT", "maxZ", "final_X"];

fn sign_string(x: &[i8]) -> String {
    x.iter().map(|&s| if s > 0 { '+' } else { '-' }).collect()
}

fn parse_sign_string(s: &str, line: usize) -> Result<Vec<i8>> {
    s.chars()
        .map(|c| match c {
            '+' => Ok(1),
            '-' => Ok(-1),
            other => Err(GswError::Parse {
                line,
                message: format!("final_X must be a string of '+' and '-', found {other:?}"),
            }),
        })
        .collect()
}

pub fn report_to_json(report: &ExperimentReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report).map_err(|e| GswError::Serialization(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn rows_to_csv(rows: &[RunRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let ser = |e: csv::Error| GswError::Serialization(e.to_string());
    w.write_record(CSV_HEADER).map_err(ser)?;
    for r in rows {
        w.write_record([
            r.run_index.to_string(),
            r.discrepancy.to_string(),
            r.hat_t.to_string(),
            r.max_z.to_string(),
            sign_string(&r.final_x),
        ])
        .map_err(ser)?;
    }
    let bytes = w.into_inner().map_err(|e| GswError::Serialization(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

pub fn parse_runs_csv(text: &str) -> Result<Vec<RunRow>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| GswError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(CSV_HEADER) {
        return Err(GswError::Parse {
            line: 1,
            message: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| GswError::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |what: &str| GswError::Parse {
            line,
            message: format!("invalid {what}"),
        };
        rows.push(RunRow {
            run_index: field(0).parse().map_err(|_| bad("run_index"))?,
            discrepancy: field(1).parse().map_err(|_| bad("discrepancy"))?,
            hat_t: field(2).parse().map_err(|_| bad("hatT"))?,
            max_z: field(3).parse().map_err(|_| bad("maxZ"))?,
            final_x: parse_sign_string(field(4), line)?,
        });
    }
    Ok(rows)
}

/// Writes the JSON aggregate or the per-run CSV.
pub fn write_report(report: &ExperimentReport, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format {
        ReportFormat::Json => report_to_json(report)?,
        ReportFormat::Csv => rows_to_csv(&report.rows)?,
    };
    let file = File::create(path).map_err(|e| GswError::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(text.as_bytes()).map_err(|e| GswError::io(path, e))?;
    w.flush().map_err(|e| GswError::io(path, e))
}

/// Reads a JSON report or a per-run CSV and returns its summary, recomputed
/// from the rows in the CSV case.
pub fn read_summary(path: impl AsRef<Path>) -> Result<Summary> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| GswError::io(path, e))?;
    match ReportFormat::from_path(path) {
        ReportFormat::Csv => summarize(&parse_runs_csv(&text)?),
        ReportFormat::Json => {
            let report: ExperimentReport =
                serde_json::from_str(&text).map_err(|e| GswError::Serialization(e.to_string()))?;
            Ok(report.summary)
        }
    }
}
