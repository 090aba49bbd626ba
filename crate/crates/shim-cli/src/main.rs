//! `shim` — sparse high-order interaction models with exact selective
//! inference.
//!
//! Subcommands:
//! - `synth`: generate a synthetic dataset CSV;
//! - `fit`: trace the exact regularisation path on a CSV dataset;
//! - `infer`: fit, then test every selected pattern (p-values and CIs);
//! - `experiment`: repeated-trials synthetic study (FPR/TPR/CI);
//! - `bench`: pruning-effectiveness profile across interaction orders;
//! - `verify`: cross-check the pruned engine against dense references.
//!
//! Exit codes: 0 success, 2 input/parse error, 3 numerical degeneracy or
//! verification failure, 4 cap refusal.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use shim::data::Dataset;
use shim::error::Error;
use shim::inference::{infer_all, InferenceConfig, Method, TAU_HALF_WIDTH_SDS};
use shim::lasso::{self, LambdaPathConfig};
use shim::path::Breakpoint;
use shim::pattern::{pattern_count, Pattern};
use shim::synth::{self, SynthConfig};
use shim::tau::{self, TauPathConfig};
use shim::{experiment, oracle};
use shim::{io as shim_io, Result};

#[derive(Parser)]
#[command(
    name = "shim",
    version,
    about = "Sparse high-order interaction models: exact paths and selective inference"
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset and write it as CSV.
    Synth(SynthArgs),
    /// Trace the exact regularisation path on a CSV dataset.
    Fit(FitArgs),
    /// Fit, then compute selective p-values and confidence intervals.
    Infer(InferArgs),
    /// Run a repeated-trials synthetic study (FPR/TPR/CI benchmarks).
    Experiment(ExperimentArgs),
    /// Profile pruning effectiveness across interaction orders.
    Bench(BenchArgs),
    /// Cross-check the pruned engine against dense reference solvers.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Rows.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Base covariates.
    #[arg(long, default_value_t = 8)]
    m: u32,
    /// Probability that a design entry is zero.
    #[arg(long, default_value_t = 0.5)]
    zeta: f64,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// True mean, e.g. "0.5:1, -2:2*3, 3:4*5*6"; empty for a pure null.
    #[arg(long, default_value = "")]
    model: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// Input CSV: header row, features in [0,1], one response column.
    #[arg(long)]
    input: PathBuf,
    /// Response column name.
    #[arg(long, default_value = "y")]
    response: String,
    /// Known noise standard deviation of the response.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
}

#[derive(Args)]
struct PathArgs {
    /// Maximum interaction order.
    #[arg(short = 'd', long = "max-order", default_value_t = 3)]
    max_order: u32,
    /// Absolute regularisation level (wins over --lambda-frac).
    #[arg(long)]
    lambda: Option<f64>,
    /// Level as a fraction of lambda_max (default 0.01 when neither given).
    #[arg(long, conflicts_with = "lambda")]
    lambda_frac: Option<f64>,
    /// Elastic-net ridge weight (0 = plain lasso).
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    /// Active-set cap; exceeding it aborts with exit code 4.
    #[arg(long, default_value_t = 100)]
    k_max: usize,
    /// Enumerate the full tree at every step (reference mode, slow).
    #[arg(long)]
    no_prune: bool,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    path: PathArgs,
    /// JSON output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    path: PathArgs,
    /// Two-sided significance level.
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Conditioning method: homo, poly, or ds.
    #[arg(long, default_value = "homo", value_parser = parse_method)]
    method: Method,
    /// Seed (only data splitting consumes randomness).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    m: u32,
    /// Probability that a design entry is zero.
    #[arg(long, default_value_t = 0.5)]
    zeta: f64,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// True mean, e.g. "0.5:1, -2:2*3, 3:4*5*6"; empty for a pure null.
    #[arg(long, default_value = "")]
    model: String,
    /// Comma-separated subset of homo,poly,ds.
    #[arg(long, default_value = "homo,poly,ds")]
    methods: String,
    /// Maximum interaction order.
    #[arg(short = 'd', long = "max-order", default_value_t = 3)]
    max_order: u32,
    /// Per-trial level rule: lambda = frac * lambda_max(trial data).
    #[arg(long, default_value_t = 0.5)]
    lambda_frac: f64,
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    k_max: usize,
    #[arg(long)]
    no_prune: bool,
    /// Master seed; every trial's data and split seeds derive from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report path (stdout if omitted).  Byte-identical per seed.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional per-test CSV in plot-ready long format.
    #[arg(long)]
    csv_out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 30)]
    m: u32,
    /// Probability that a design entry is zero.
    #[arg(long, default_value_t = 0.95)]
    zeta: f64,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// True mean; empty for a pure null.
    #[arg(long, default_value = "")]
    model: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated interaction orders to profile.
    #[arg(long, default_value = "5,6,7,8")]
    orders: String,
    #[arg(long, default_value_t = 0.5)]
    lambda_frac: f64,
    #[arg(long, default_value_t = 100)]
    k_max: usize,
    /// Also run the unpruned sweeps (full tree; slow for large orders).
    #[arg(long)]
    unpruned: bool,
    /// JSON output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    path: PathArgs,
    /// Cap on dense reference columns (larger problems are refused, exit 4).
    #[arg(long, default_value_t = 20_000)]
    cap: usize,
    /// JSON output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

fn main() {
    let cli = Cli::parse();
    shim::exec::configure_threads(cli.jobs);
    if let Err(e) = run(cli.cmd) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::Fit(a) => cmd_fit(a),
        Cmd::Infer(a) => cmd_infer(a),
        Cmd::Experiment(a) => cmd_experiment(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Verify(a) => cmd_verify(a),
    }
}

fn load(data: &DataArgs) -> Result<Dataset> {
    if !(data.sigma > 0.0 && data.sigma.is_finite()) {
        return Err(Error::Input(format!(
            "--sigma must be positive and finite, got {}",
            data.sigma
        )));
    }
    shim_io::load_csv(&data.input, &data.response, data.sigma * data.sigma)
}

/// Resolves the absolute stop level, spending a `lambda_max` sweep only when
/// a fraction was requested.
fn resolve_target(data: &Dataset, path: &PathArgs) -> Result<Option<f64>> {
    match (path.lambda, path.lambda_frac) {
        (Some(l), _) => Ok(Some(l)),
        (None, Some(f)) => {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::Input(format!(
                    "--lambda-frac must be positive and finite, got {f}"
                )));
            }
            let (lmax, _, _) = lasso::lambda_max(data, data.y(), path.max_order)?;
            Ok(Some(f * lmax))
        }
        (None, None) => Ok(None),
    }
}

/// Label like "z1*z3" from the dataset's column names.
fn pattern_label(data: &Dataset, pattern: &Pattern) -> String {
    pattern
        .indices()
        .iter()
        .map(|&j| data.names()[(j - 1) as usize].clone())
        .collect::<Vec<_>>()
        .join("*")
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n: a.n,
        m: a.m,
        zeta: a.zeta,
        sigma: a.sigma,
        model: synth::parse_model(&a.model)?,
        seed: a.seed,
    };
    let data = synth::generate(&cfg)?;
    shim_io::save_csv(&data, &a.out)?;
    eprintln!(
        "wrote {} rows x {} columns (features + response) to {}",
        data.n(),
        data.m() + 1,
        a.out.display()
    );
    Ok(())
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let data = load(&a.data)?;
    let start = Instant::now();
    let target = resolve_target(&data, &a.path)?;
    let cfg = LambdaPathConfig {
        d: a.path.max_order,
        lambda_target: target,
        ridge: a.path.ridge,
        k_max: a.path.k_max,
        prune: !a.path.no_prune,
        ..LambdaPathConfig::default()
    };
    let path = lasso::lambda_path(&data, data.y(), &cfg)?;
    let kkt = path
        .model
        .kkt_residuals(&data, data.y(), cfg.d, cfg.prune);
    let millis = start.elapsed().as_secs_f64() * 1e3;

    let labels: Vec<String> = path
        .model
        .patterns()
        .iter()
        .map(|p| pattern_label(&data, p))
        .collect();
    let out = json!({
        "lambda": path.model.lambda(),
        "lambda_max": path.lambda_max,
        "d": cfg.d,
        "ridge": cfg.ridge,
        "n": data.n(),
        "m": data.m(),
        "pattern_count": pattern_count(data.m(), cfg.d).map(|c| c as f64),
        "timings": {"total_ms": millis},
        "first_pattern": path.first_pattern,
        "kinks": path.breakpoints.len(),
        "breakpoints": path.breakpoints,
        "active": path.model.patterns(),
        "names": labels,
        "signs": path.model.signs(),
        "beta": path.model.beta(),
        "kkt_worst": kkt.worst(path.model.lambda()),
        "nodes_visited": {
            "total": path.nodes_total,
            "per_step": path.nodes_per_step,
            "kkt_sweep": kkt.nodes,
        },
        "aliases": path.aliases,
    });
    shim_io::write_json(&out, a.out.as_deref())
}

fn cmd_infer(a: InferArgs) -> Result<()> {
    let data = load(&a.data)?;
    let cfg = InferenceConfig {
        d: a.path.max_order,
        lambda: a.path.lambda,
        lambda_frac: a.path.lambda_frac,
        ridge: a.path.ridge,
        alpha: a.alpha,
        method: a.method,
        k_max: a.path.k_max,
        prune: !a.path.no_prune,
        seed: a.seed,
        ..InferenceConfig::default()
    };
    let start = Instant::now();
    let report = infer_all(&data, &cfg)?;
    let millis = start.elapsed().as_secs_f64() * 1e3;

    let patterns: Vec<Value> = report
        .tests
        .iter()
        .map(|t| {
            let ci = match (t.ci_lower, t.ci_upper) {
                (Some(lo), Some(hi)) => json!([lo, hi]),
                _ => Value::Null,
            };
            json!({
                "pattern": t.pattern,
                "name": pattern_label(&data, &t.pattern),
                "sign": t.sign,
                "beta": t.beta,
                "stat": t.stat,
                "sd": t.sd,
                "p_selective": t.p_value,
                "ci": ci,
                "region": t.region,
                "kinks": t.kinks,
                "nodes_visited": t.nodes,
                "error": t.error,
            })
        })
        .collect();
    let out = json!({
        "lambda": report.lambda,
        "lambda_max": report.lambda_max,
        "d": cfg.d,
        "ridge": cfg.ridge,
        "alpha": report.alpha,
        "sigma": a.data.sigma,
        "method": report.method.to_string(),
        "seed": a.seed,
        "timings": {"total_ms": millis},
        "selected": report.selected,
        "signs": report.signs,
        "beta": report.beta,
        "patterns": patterns,
        "nodes_visited": {
            "selection": report.selection_nodes,
            "inference": report.inference_nodes,
        },
    });
    shim_io::write_json(&out, a.out.as_deref())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let methods: Vec<Method> = a
        .methods
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::Input("--methods selected no method".into()));
    }
    let cfg = experiment::ExperimentConfig {
        trials: a.trials,
        synth: SynthConfig {
            n: a.n,
            m: a.m,
            zeta: a.zeta,
            sigma: a.sigma,
            model: synth::parse_model(&a.model)?,
            seed: 0,
        },
        methods,
        d: a.max_order,
        lambda_frac: a.lambda_frac,
        ridge: a.ridge,
        alpha: a.alpha,
        k_max: a.k_max,
        prune: !a.no_prune,
        seed: a.seed,
        ..experiment::ExperimentConfig::default()
    };
    let report = experiment::run(&cfg);
    for s in &report.summaries {
        eprintln!(
            "{}: {}/{} trials ok, {} tests, {} rejections{}{}{}",
            s.method,
            s.trials_ok,
            cfg.trials,
            s.tests,
            s.rejections,
            s.fpr.map_or(String::new(), |v| format!(", fpr {v:.4}")),
            s.tpr.map_or(String::new(), |v| format!(", tpr {v:.4}")),
            s.mean_ci_length
                .map_or(String::new(), |v| format!(", mean ci length {v:.4}")),
        );
    }
    if let Some(csv_path) = &a.csv_out {
        write_trials_csv(&report, csv_path)?;
        eprintln!("wrote per-test csv to {}", csv_path.display());
    }
    shim_io::write_json(&report, a.out.as_deref())
}

/// Long-format per-test rows, one line per (trial, method, tested pattern).
fn write_trials_csv(report: &experiment::ExperimentReport, path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record([
        "trial", "method", "data_seed", "pattern", "is_true", "p_value", "ci_lower",
        "ci_upper", "error",
    ])?;
    let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.16e}"));
    for trial in &report.trials {
        for test in &trial.tests {
            wtr.write_record([
                trial.trial.to_string(),
                trial.method.to_string(),
                trial.data_seed.to_string(),
                test.pattern.to_string(),
                test.is_true.to_string(),
                fmt(test.p_value),
                fmt(test.ci_lower),
                fmt(test.ci_upper),
                test.error.clone().unwrap_or_default(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let orders: Vec<u32> = a
        .orders
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u32>()
                .map_err(|e| Error::Input(format!("bad order '{s}': {e}")))
        })
        .collect::<Result<_>>()?;
    if orders.is_empty() {
        return Err(Error::Input("--orders selected no interaction order".into()));
    }
    let synth_cfg = SynthConfig {
        n: a.n,
        m: a.m,
        zeta: a.zeta,
        sigma: a.sigma,
        model: synth::parse_model(&a.model)?,
        seed: a.seed,
    };
    let data = synth::generate(&synth_cfg)?;

    let mut records = Vec::new();
    for &d in &orders {
        let start = Instant::now();
        let (lmax, _, _) = lasso::lambda_max(&data, data.y(), d)?;
        let lambda = a.lambda_frac * lmax;
        let cfg = LambdaPathConfig {
            d,
            lambda_target: Some(lambda),
            k_max: a.k_max,
            ..LambdaPathConfig::default()
        };
        let path = lasso::lambda_path(&data, data.y(), &cfg)?;
        let total = pattern_count(a.m, d).map(|c| c as f64);

        let mut record = json!({
            "d": d,
            "pattern_count": total,
            "lambda": lambda,
            "lambda_max": lmax,
            "selected": path.model.patterns().len(),
            "lambda_kinks": path.breakpoints.len(),
            "lambda_nodes": path.nodes_total,
        });
        if path.model.is_empty() {
            record["note"] = json!("empty selection; conditioning path skipped");
        } else {
            let target = shim::inference::test_target(&path.model, 0, data.y(), data.sigma2())?;
            let lo = target.stat - TAU_HALF_WIDTH_SDS * target.sd;
            let hi = target.stat + TAU_HALF_WIDTH_SDS * target.sd;
            let tcfg = TauPathConfig {
                k_max: a.k_max,
                ..TauPathConfig::new(lambda, d, lo, hi)
            };
            let tp = tau::tau_path(&data, &target.q, &target.b, &tcfg)?;
            let kinks = tp.kinks.len().max(1) as f64;
            let per_kink = tp.nodes_total as f64 / kinks;
            record["tau_kinks"] = json!(tp.kinks.len());
            record["tau_nodes"] = json!(tp.nodes_total);
            record["tau_nodes_per_kink"] = json!(per_kink);
            record["tau_node_fraction_per_kink"] = json!(total.map(|t| per_kink / t));
            if a.unpruned {
                let up = oracle::unpruned_tau_path(&data, &target.q, &target.b, &tcfg)?;
                record["tau_nodes_unpruned"] = json!(up.nodes_total);
                record["speedup_nodes"] =
                    json!(up.nodes_total as f64 / tp.nodes_total.max(1) as f64);
            }
        }
        record["millis"] = json!(start.elapsed().as_secs_f64() * 1e3);
        records.push(record);
    }
    let out = json!({
        "n": a.n,
        "m": a.m,
        "zeta": a.zeta,
        "sigma": a.sigma,
        "seed": a.seed,
        "lambda_frac": a.lambda_frac,
        "records": records,
    });
    shim_io::write_json(&out, a.out.as_deref())
}

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

/// Worst relative deviation between two kink sequences; infinite on any
/// structural mismatch (count, event kind, or pattern).
fn kink_deviation(a: &[Breakpoint], b: &[Breakpoint]) -> (f64, String) {
    if a.len() != b.len() {
        return (
            f64::INFINITY,
            format!("kink counts differ: {} vs {}", a.len(), b.len()),
        );
    }
    let mut worst = 0.0_f64;
    for (x, y) in a.iter().zip(b) {
        if x.event != y.event || x.pattern != y.pattern {
            return (
                f64::INFINITY,
                format!(
                    "event mismatch at {:.6e}: {:?} {} vs {:?} {}",
                    x.param, x.event, x.pattern, y.event, y.pattern
                ),
            );
        }
        let dev = (x.param - y.param).abs() / x.param.abs().max(y.param.abs()).max(1.0);
        worst = worst.max(dev);
    }
    (worst, format!("{} kinks, max param deviation {worst:.3e}", a.len()))
}

fn vec_deviation(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

fn cmd_verify(a: VerifyArgs) -> Result<()> {
    let data = load(&a.data)?;
    let d = a.path.max_order;
    let ridge = a.path.ridge;
    let target = resolve_target(&data, &a.path)?;
    let cfg = LambdaPathConfig {
        d,
        lambda_target: target,
        ridge,
        k_max: a.path.k_max,
        prune: true,
        ..LambdaPathConfig::default()
    };
    let mut checks: Vec<Check> = Vec::new();

    let path = lasso::lambda_path(&data, data.y(), &cfg)?;
    let lambda = path.model.lambda();

    // 1. Pruning exactness on the selection path.
    let unpruned = oracle::unpruned_lambda_path(&data, data.y(), &cfg)?;
    let (dev, detail) = kink_deviation(&path.breakpoints, &unpruned.breakpoints);
    let beta_dev = vec_deviation(path.model.beta(), unpruned.model.beta());
    checks.push(Check {
        name: "lambda_path_pruned_vs_unpruned",
        pass: dev <= 1e-9
            && beta_dev <= 1e-9
            && path.model.patterns() == unpruned.model.patterns(),
        detail: format!("{detail}; final beta deviation {beta_dev:.3e}"),
    });

    // 2. Engine vs the dense (augmented for ridge > 0) reference path.
    let dense = oracle::elnet_lambda_oracle(
        &data,
        d,
        ridge,
        Some(path.lambda_target),
        Some(a.cap),
        a.path.k_max,
    )?;
    let (dev, detail) = kink_deviation(&path.breakpoints, &dense.breakpoints);
    let beta_dev = vec_deviation(path.model.beta(), &dense.beta);
    checks.push(Check {
        name: "lambda_path_vs_dense_reference",
        pass: dev <= 1e-8 && beta_dev <= 1e-8 && path.model.patterns() == &dense.active[..],
        detail: format!("{detail}; final beta deviation {beta_dev:.3e}"),
    });

    // 3. Stationarity at the stop level, certified over the whole tree.
    let kkt = path.model.kkt_residuals(&data, data.y(), d, true);
    let worst = kkt.worst(lambda);
    let tol = 1e-6 * path.lambda_max;
    checks.push(Check {
        name: "kkt_at_target",
        pass: worst <= tol,
        detail: format!("worst residual {worst:.3e} vs tolerance {tol:.3e}"),
    });

    // 4./5. Conditioning path for the first selected pattern.
    if path.model.is_empty() {
        checks.push(Check {
            name: "tau_path_checks",
            pass: true,
            detail: "empty selection at the stop level; nothing to condition on".into(),
        });
    } else {
        let target = shim::inference::test_target(&path.model, 0, data.y(), data.sigma2())?;
        let lo = target.stat - TAU_HALF_WIDTH_SDS * target.sd;
        let hi = target.stat + TAU_HALF_WIDTH_SDS * target.sd;
        let tcfg = TauPathConfig {
            ridge,
            k_max: a.path.k_max,
            ..TauPathConfig::new(lambda, d, lo, hi)
        };
        let tp = tau::tau_path(&data, &target.q, &target.b, &tcfg)?;

        let up = oracle::unpruned_tau_path(&data, &target.q, &target.b, &tcfg)?;
        let (dev, detail) = kink_deviation(&tp.kinks, &up.kinks);
        checks.push(Check {
            name: "tau_path_pruned_vs_unpruned",
            pass: dev <= 1e-9,
            detail,
        });

        let dense_tau = oracle::elnet_tau_oracle(
            &data,
            d,
            ridge,
            &target.q,
            &target.b,
            lambda,
            lo,
            hi,
            Some(a.cap),
            a.path.k_max,
        )?;
        let (dev, detail) = kink_deviation(&tp.kinks, &dense_tau.kinks);
        let mut segs_ok = tp.segments.len() == dense_tau.segments.len();
        if segs_ok {
            for (s, r) in tp.segments.iter().zip(&dense_tau.segments) {
                let mut ours = s.sorted_patterns();
                let mut theirs = r.patterns.clone();
                ours.sort();
                theirs.sort();
                if ours != theirs {
                    segs_ok = false;
                    break;
                }
            }
        }
        checks.push(Check {
            name: "tau_path_vs_dense_reference",
            pass: dev <= 1e-8 && segs_ok,
            detail: format!("{detail}; segment sets match: {segs_ok}"),
        });
    }

    let pass = checks.iter().all(|c| c.pass);
    let out = json!({
        "pass": pass,
        "lambda": lambda,
        "lambda_max": path.lambda_max,
        "d": d,
        "ridge": ridge,
        "checks": checks
            .iter()
            .map(|c| json!({"name": c.name, "pass": c.pass, "detail": c.detail}))
            .collect::<Vec<_>>(),
    });
    shim_io::write_json(&out, a.out.as_deref())?;
    if pass {
        Ok(())
    } else {
        let failed: Vec<&str> = checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name)
            .collect();
        Err(Error::Numerical(format!(
            "verification failed: {}",
            failed.join(", ")
        )))
    }
}
