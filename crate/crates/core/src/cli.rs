//! The `gsw` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::enumeration::{
    brute_force_min_discrepancy, conditional_increment_check, enumerate_walk_default, verify_martingale,
    verify_subgaussian, BRUTE_FORCE_MAX_N,
};
use crate::error::{GswError, Result};
use crate::harness::{build_report, read_summary, run_experiment, write_report, InstanceDescriptor, ReportFormat};
use crate::inequalities::{cosh_grid, hoeffding_grid, lemma1_grid, lemma1_ratio_grid, GridMinimum};
use crate::instance::{generate_instance, load_instance, save_instance, InstanceKind};
use crate::ortho::{coordinate_z, verify_direction_expansion, OrthoTrace};
use crate::rng::{stream, unit_vector, VECTOR_STREAM};
use crate::smoothed::{
    admissibility_from_tilted, build_augmented, default_cutoff, default_delta, epsilon_of, outer_success_estimate,
    random_comparison_trial, tilt_distribution, SmoothedConfig,
};
use crate::walk::{run_walk, StepRecord, WalkTrace};

/// Environment variable consulted when `--seed` is absent.
pub const SEED_ENV: &str = "GSW_SEED";

const ORACLE_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "gsw", version, about = "Gram-Schmidt walk experiments and exact checks")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Run the walk once and print the coloring.
    Run(RunArgs),
    /// Rebuild the orthogonal decomposition of a run and print σ, L_p, T̂ and Z_{e_i}.
    Trace(TraceArgs),
    /// Monte Carlo experiment; writes a JSON report or per-run CSV.
    Mc(McArgs),
    /// Exact checks by enumerating every branch of the walk.
    Oracle(OracleArgs),
    /// Grid certification of the scalar inequalities.
    CheckIneq(CheckIneqArgs),
    /// Smoothed-analysis pipeline on a small instance.
    Smoothed(SmoothedArgs),
    /// Summarize a JSON report or recompute one from a per-run CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    /// identity, random_unit_sphere, random_in_ball, duplicated_column or sign_columns.
    #[arg(long, value_parser = parse_kind)]
    kind: InstanceKind,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the steps as a JSON array of step records.
    #[arg(long)]
    dump_trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TraceArgs {
    #[arg(long)]
    instance: PathBuf,
    /// A step dump written by `run --dump-trace`; without it the walk is rerun with `--seed`.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct McArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to the extension of `--out`.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OracleCheck {
    Martingale,
    Subgaussian,
    Increments,
    Bruteforce,
    All,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value_t = OracleCheck::All)]
    check: OracleCheck,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// `e<i>` (1-based coordinate) or `random`; default: every e_i.
    #[arg(long)]
    v: Option<String>,
    /// Seed for `--v random`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Inequality {
    Lemma1,
    Cosh,
    Hoeffding,
    Comparison,
}

#[derive(Debug, Args)]
struct CheckIneqArgs {
    #[arg(long, value_enum)]
    which: Inequality,
    #[arg(long, default_value_t = 0.01)]
    grid_step: f64,
    /// Trials for `--which comparison`.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct SmoothedArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 32.0)]
    kappa: f64,
    /// Default max((ln d)², 2).
    #[arg(long)]
    cutoff_c: Option<f64>,
    #[arg(long, conflicts_with = "epsilon_auto", required_unless_present = "epsilon_auto")]
    epsilon: Option<f64>,
    /// Use ε = σ √(ln d) d^{−κ/32}.
    #[arg(long)]
    epsilon_auto: bool,
    /// Default 32 d^{1/2 − κ/32}.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 200)]
    r_trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Print a short text summary instead of JSON.
    #[arg(long)]
    summary: bool,
}

fn parse_kind(s: &str) -> std::result::Result<InstanceKind, String> {
    s.parse().map_err(|e: GswError| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum SeedSource {
    Flag,
    Env,
    Default,
}

struct Seed {
    value: u64,
    source: SeedSource,
}

enum Failure {
    Usage(String),
    Domain(GswError),
}

impl From<GswError> for Failure {
    fn from(e: GswError) -> Self {
        Failure::Domain(e)
    }
}

fn resolve_seed(flag: Option<u64>) -> std::result::Result<Seed, Failure> {
    if let Some(value) = flag {
        return Ok(Seed {
            value,
            source: SeedSource::Flag,
        });
    }
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(|value| Seed {
                value,
                source: SeedSource::Env,
            })
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}={s:?} is not a 64-bit unsigned integer"))),
        Err(_) => Ok(Seed {
            value: 0,
            source: SeedSource::Default,
        }),
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code: 0 on success, 1 on domain errors, 2 on usage errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        // A second initialization (e.g. in tests) keeps the existing pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let mut out = std::io::stdout().lock();
    match dispatch(cli.command, &mut out) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

type Out<'a> = &'a mut dyn Write;

fn emit(out: Out, value: &impl Serialize) -> std::result::Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| GswError::Serialization(e.to_string()))?;
    writeln!(out, "{text}").map_err(|e| GswError::io("<stdout>", e))?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| GswError::Serialization(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| GswError::io(path, e))
}

fn dispatch(command: Command, out: Out) -> std::result::Result<(), Failure> {
    match command {
        Command::Gen(a) => cmd_gen(a, out),
        Command::Run(a) => cmd_run(a, out),
        Command::Trace(a) => cmd_trace(a, out),
        Command::Mc(a) => cmd_mc(a, out),
        Command::Oracle(a) => cmd_oracle(a, out),
        Command::CheckIneq(a) => cmd_check_ineq(a, out),
        Command::Smoothed(a) => cmd_smoothed(a, out),
        Command::Report(a) => cmd_report(a, out),
    }
}

fn signs(x: &[i8]) -> String {
    x.iter().map(|&s| if s > 0 { '+' } else { '-' }).collect()
}

fn cmd_gen(a: GenArgs, out: Out) -> std::result::Result<(), Failure> {
    let seed = resolve_seed(a.seed)?;
    let inst = generate_instance(a.kind, a.d, a.n, seed.value)?;
    save_instance(&inst, &a.out)?;
    emit(
        out,
        &json!({"kind": a.kind, "d": a.d, "n": a.n, "seed": seed.value, "seed_source": seed.source, "out": a.out}),
    )
}

fn cmd_run(a: RunArgs, out: Out) -> std::result::Result<(), Failure> {
    let inst = load_instance(&a.instance)?;
    let seed = resolve_seed(a.seed)?;
    let trace = run_walk(&inst, &mut stream(seed.value, 0))?;
    if let Some(path) = &a.dump_trace {
        write_json(path, &trace.steps)?;
    }
    emit(
        out,
        &json!({
            "seed": seed.value,
            "seed_source": seed.source,
            "steps": trace.len(),
            "final_X": signs(&trace.final_x),
            "discrepancy": inst.discrepancy(&trace.final_x),
        }),
    )
}

fn cmd_trace(a: TraceArgs, out: Out) -> std::result::Result<(), Failure> {
    let inst = load_instance(&a.instance)?;
    let (trace, seed) = match &a.trace {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| GswError::io(path, e))?;
            let steps: Vec<StepRecord> =
                serde_json::from_str(&text).map_err(|e| GswError::Serialization(e.to_string()))?;
            (WalkTrace::from_steps(inst.n(), steps)?, None)
        }
        None => {
            let seed = resolve_seed(a.seed)?;
            (run_walk(&inst, &mut stream(seed.value, 0))?, Some(seed))
        }
    };
    let ortho = OrthoTrace::build(&inst, &trace)?;
    let pivots: Vec<_> = ortho
        .pivots
        .iter()
        .zip(&ortho.nontrivial)
        .map(|(p, &l)| json!({"pivot": p.pivot, "start_step": p.start_step, "L": l, "blocks": p.blocks}))
        .collect();
    emit(
        out,
        &json!({
            "seed": seed.as_ref().map(|s| s.value),
            "seed_source": seed.as_ref().map(|s| s.source),
            "sigma": ortho.sigma,
            "pivots": pivots,
            "hatT": ortho.hat_t,
            "z": coordinate_z(&inst, &ortho),
            "expansion_residual": verify_direction_expansion(&inst, &trace, &ortho),
        }),
    )
}

fn cmd_mc(a: McArgs, out: Out) -> std::result::Result<(), Failure> {
    let inst = load_instance(&a.instance)?;
    let seed = resolve_seed(a.seed)?;
    let stats = run_experiment(&inst, a.runs, seed.value)?;
    let mut descriptor = InstanceDescriptor::of(&inst);
    descriptor.path = Some(a.instance.display().to_string());
    let mut report = build_report(&inst, descriptor, &stats, seed.value)?;
    report.seed_source = Some(serde_json::to_value(seed.source).unwrap().as_str().unwrap().to_string());
    let format = match a.format {
        Some(FormatArg::Json) => ReportFormat::Json,
        Some(FormatArg::Csv) => ReportFormat::Csv,
        None => ReportFormat::from_path(&a.out),
    };
    write_report(&report, &a.out, format)?;
    emit(out, &report.summary)
}

fn oracle_vectors(a: &OracleArgs, d: usize) -> std::result::Result<Vec<(String, Vec<f64>)>, Failure> {
    let basis = |i: usize| {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        (format!("e{}", i + 1), e)
    };
    match a.v.as_deref() {
        None => Ok((0..d).map(basis).collect()),
        Some("random") => {
            let seed = resolve_seed(a.seed)?;
            Ok(vec![("random".into(), unit_vector(d, &mut stream(seed.value, VECTOR_STREAM)))])
        }
        Some(s) => {
            let i: usize = s
                .strip_prefix('e')
                .and_then(|k| k.parse().ok())
                .filter(|&k| k >= 1 && k <= d)
                .ok_or_else(|| Failure::Usage(format!("--v must be e1..e{d} or random, got {s:?}")))?;
            Ok(vec![basis(i - 1)])
        }
    }
}

fn cmd_oracle(a: OracleArgs, out: Out) -> std::result::Result<(), Failure> {
    let inst = load_instance(&a.instance)?;
    let vectors = oracle_vectors(&a, inst.d())?;
    let want = |c: OracleCheck| a.check == c || a.check == OracleCheck::All;
    let mut report = serde_json::Map::new();
    if want(OracleCheck::Bruteforce) {
        if inst.n() > BRUTE_FORCE_MAX_N {
            return Err(Failure::Domain(GswError::TooLarge(format!(
                "brute force needs n <= {BRUTE_FORCE_MAX_N}"
            ))));
        }
        let (value, argmin) = brute_force_min_discrepancy(&inst)?;
        report.insert("bruteforce".into(), json!({"min_discrepancy": value, "argmin": signs(&argmin)}));
    }
    if a.check != OracleCheck::Bruteforce {
        let dist = enumerate_walk_default(&inst)?;
        report.insert("leaves".into(), json!(dist.leaves.len()));
        if want(OracleCheck::Martingale) {
            let vals: Vec<_> = vectors.iter().map(|(_, v)| verify_martingale(&dist, &inst, v)).collect();
            let max = vals.iter().copied().fold(0.0, f64::max);
            report.insert("martingale".into(), json!({"max_abs_mean": max, "holds": max <= ORACLE_TOL}));
        }
        if want(OracleCheck::Subgaussian) {
            let mut max = f64::NEG_INFINITY;
            let mut per = Vec::new();
            for (name, v) in &vectors {
                let m = verify_subgaussian(&dist, &inst, v, a.lambda)?;
                max = max.max(m);
                per.push(json!({"v": name, "moment": m}));
            }
            report.insert(
                "subgaussian".into(),
                json!({"lambda": a.lambda, "max_moment": max, "holds": max <= 1.0 + ORACLE_TOL, "per_vector": per}),
            );
        }
        if want(OracleCheck::Increments) {
            let dev = conditional_increment_check(&dist);
            report.insert("increments".into(), json!({"deviation": dev, "holds": dev.max() <= ORACLE_TOL}));
        }
    }
    emit(out, &report)
}

fn grid_json(g: &GridMinimum, tol: f64) -> serde_json::Value {
    json!({"min_gap": g.min_gap, "argmin": g.argmin, "points": g.points, "holds": g.min_gap >= -tol})
}

fn cmd_check_ineq(a: CheckIneqArgs, out: Out) -> std::result::Result<(), Failure> {
    if !(a.grid_step > 0.0) {
        return Err(Failure::Usage("--grid-step must be positive".into()));
    }
    let value = match a.which {
        Inequality::Lemma1 => json!({
            "literal": grid_json(&lemma1_grid(0.99, 3.0, a.grid_step), 1e-12),
            "normalized": grid_json(&lemma1_ratio_grid(0.99, 3.0, a.grid_step), 1e-12),
        }),
        Inequality::Hoeffding => grid_json(&hoeffding_grid(3.0, a.grid_step), 1e-12),
        Inequality::Cosh => {
            let (first, second) = cosh_grid(10.0, 5.0, a.grid_step);
            json!({"strict": grid_json(&first, 0.0), "ratio": grid_json(&second, 1e-12)})
        }
        Inequality::Comparison => {
            let seed = resolve_seed(a.seed)?;
            let mut rng = stream(seed.value, 0);
            let mut worst = f64::INFINITY;
            let mut failures = 0;
            for _ in 0..a.trials {
                let c = random_comparison_trial(&mut rng).check()?;
                let scale = c.constant * c.product;
                let rel = if scale > 0.0 { c.slack / scale } else { c.slack };
                worst = worst.min(rel);
                if !c.holds(1e-6) {
                    failures += 1;
                }
            }
            json!({"trials": a.trials, "seed": seed.value, "worst_relative_slack": worst, "failures": failures, "holds": failures == 0})
        }
    };
    emit(out, &value)
}

fn cmd_smoothed(a: SmoothedArgs, out: Out) -> std::result::Result<(), Failure> {
    let inst = load_instance(&a.instance)?;
    let seed = resolve_seed(a.seed)?;
    let d = inst.d();
    let epsilon = match a.epsilon {
        Some(e) => e,
        None => epsilon_of(a.sigma, d, a.kappa)?,
    };
    let config = SmoothedConfig::new(
        a.sigma,
        a.kappa,
        a.cutoff_c.unwrap_or_else(|| default_cutoff(d)),
        epsilon,
        a.r_trials,
        seed.value,
        a.delta.unwrap_or_else(|| default_delta(d.max(2), a.kappa)),
    )
    .map_err(|e| Failure::Usage(e.to_string()))?;
    let leaves = enumerate_walk_default(&build_augmented(&inst))?;
    let tilted = tilt_distribution(&leaves, &inst, config.sigma, config.cutoff_c)?;
    let outer = outer_success_estimate(&inst, &tilted, &config)?;
    let admissibility = admissibility_from_tilted(&config, &inst, &tilted);
    let report = json!({
        "instance": {"d": d, "n": inst.n(), "path": a.instance},
        "config": config,
        "seed_source": seed.source,
        "tilted": {
            "W": tilted.w,
            "V": tilted.v,
            "cutoff_set_mass": tilted.cutoff_set_mass,
            "support_size": tilted.support.len(),
        },
        "outer": {
            "trials": outer.trials,
            "successes": outer.successes,
            "fraction": outer.fraction,
            "wilson_low": outer.wilson_low,
            "wilson_high": outer.wilson_high,
        },
        "admissibility": admissibility,
    });
    if let Some(path) = &a.out {
        write_json(path, &report)?;
    }
    emit(out, &report)
}

fn cmd_report(a: ReportArgs, out: Out) -> std::result::Result<(), Failure> {
    let s = read_summary(&a.input)?;
    if a.summary {
        let text = format!(
            "runs {}\nmean hatT {} (se {})\nmean maxZ {} (se {})\nbound {}\ndiscrepancy min {} mean {} max {}\nwithin bound {}\n",
            s.runs,
            s.mean_hat_t,
            s.se_hat_t,
            s.mean_max_z,
            s.se_max_z,
            s.theorem1_bound,
            s.min_disc,
            s.mean_disc,
            s.max_disc,
            s.frac_within_bound
        );
        out.write_all(text.as_bytes()).map_err(|e| GswError::io("<stdout>", e))?;
        Ok(())
    } else {
        emit(out, &s)
    }
}
