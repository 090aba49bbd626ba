//! Acceptance suite: nine end-to-end checks, one test each.  Every test
//! prints a single summary line
//!
//! ```text
//! ACCEPTANCE <k> <name>: PASS|FAIL
//! ```
//!
//! and then asserts the outcome, so `cargo test --test acceptance --
//! --nocapture` shows the full scoreboard.  All tolerances and instance
//! parameters are pinned as constants below.

use std::sync::OnceLock;

use shim::data::Dataset;
use shim::experiment::{self, ExperimentConfig, ExperimentReport};
use shim::inference::{self, InferenceConfig, Method};
use shim::lasso::{self, LambdaPathConfig};
use shim::oracle;
use shim::path::Breakpoint;
use shim::pattern::{feature_column, pattern_count};
use shim::stats;
use shim::synth::{self, SynthConfig};
use shim::tau::{self, TauPathConfig};
use shim::{baselines, io, ActiveModel, Result};

/// Pruned and unpruned paths must agree to this relative tolerance.
const PRUNING_REL_TOL: f64 = 1e-9;
/// Stationarity residual bound at every kink, relative to `lambda_max`.
const KKT_REL_TOL: f64 = 1e-6;
/// Engine-versus-dense-reference tolerance for the elastic net.
const ELNET_REL_TOL: f64 = 1e-8;
/// Test level for the calibration experiments.
const ALPHA: f64 = 0.05;
/// Confidence of the binomial acceptance band on the false positive count.
const BAND_CONF: f64 = 0.95;
/// The single-interval baseline region must fit inside the exact region up
/// to this absolute slack.
const CONTAINMENT_TOL: f64 = 1e-9;
/// Node counts may move at most this fraction once the order saturates.
const SATURATION_FRAC: f64 = 0.10;
/// Statistic line is swept over `stat +- this many standard deviations`.
const TAU_HALF_WIDTH_SDS: f64 = 20.0;

fn report(k: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {k} {name}: {}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "acceptance criterion {k} ({name}) failed: {detail}");
}

fn null_data(seed: u64, n: usize, m: u32, zeta: f64) -> Result<Dataset> {
    synth::generate(&SynthConfig {
        n,
        m,
        zeta,
        sigma: 1.0,
        model: Vec::new(),
        seed,
    })
}

/// Worst relative parameter deviation between two kink sequences, or
/// infinity if they disagree on length, event type, or pattern.
fn kink_deviation(a: &[Breakpoint], b: &[Breakpoint]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut worst = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        if x.event != y.event || x.pattern != y.pattern {
            return f64::INFINITY;
        }
        worst = worst.max((x.param - y.param).abs() / x.param.abs().max(1.0));
    }
    worst
}

fn vec_deviation(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Rebuilds the active model recorded at a kink and refits against `y`.
fn model_at(
    data: &Dataset,
    kink: &Breakpoint,
    lambda: f64,
    ridge: f64,
    y: &[f64],
) -> Result<ActiveModel> {
    let mut model = ActiveModel::new(lambda, ridge);
    for (pat, sign) in kink.active_after.iter().zip(&kink.signs_after) {
        model.include(pat.clone(), feature_column(data, pat), *sign);
    }
    model.refit(y)?;
    Ok(model)
}

/// Fits to `frac * lambda_max` and returns the path plus the level.
fn fit(
    data: &Dataset,
    d: u32,
    frac: f64,
    ridge: f64,
    prune: bool,
) -> Result<(lasso::LambdaPath, f64)> {
    let (lmax, _, _) = lasso::lambda_max(data, data.y(), d)?;
    let cfg = LambdaPathConfig {
        d,
        lambda_target: Some(frac * lmax),
        ridge,
        k_max: 150,
        prune,
        max_kinks: 4000,
    };
    let path = lasso::lambda_path(data, data.y(), &cfg)?;
    Ok((path, frac * lmax))
}

// ---------------------------------------------------------------------------
// 1. Pruned and unpruned homotopies agree kink for kink.
// ---------------------------------------------------------------------------

fn crit1() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut tau_instances = 0;
    for i in 0..50u64 {
        let m = [8, 10, 12][(i % 3) as usize];
        let zeta = [0.5, 0.9][(i % 2) as usize];
        let data = null_data(100 + i, 50, m, zeta)?;
        let y = data.y();
        let (pruned, lambda) = fit(&data, 3, 0.3, 0.0, true)?;

        let cfg = LambdaPathConfig {
            d: 3,
            lambda_target: Some(lambda),
            ridge: 0.0,
            k_max: 150,
            prune: true,
            max_kinks: 4000,
        };
        let free = oracle::unpruned_lambda_path(&data, y, &cfg)?;
        worst = worst.max(kink_deviation(&pruned.breakpoints, &free.breakpoints));
        worst = worst.max(vec_deviation(pruned.model.beta(), free.model.beta()));
        if pruned.model.patterns() != free.model.patterns() {
            return Ok((false, format!("final active sets differ on instance {i}")));
        }

        if pruned.model.is_empty() {
            continue;
        }
        tau_instances += 1;
        let target = inference::test_target(&pruned.model, 0, y, data.sigma2())?;
        let tcfg = TauPathConfig::new(
            lambda,
            3,
            target.stat - TAU_HALF_WIDTH_SDS * target.sd,
            target.stat + TAU_HALF_WIDTH_SDS * target.sd,
        );
        let tp = tau::tau_path(&data, &target.q, &target.b, &tcfg)?;
        let tf = oracle::unpruned_tau_path(&data, &target.q, &target.b, &tcfg)?;
        worst = worst.max(kink_deviation(&tp.kinks, &tf.kinks));
        if tp.segments.len() != tf.segments.len()
            || tp
                .segments
                .iter()
                .zip(&tf.segments)
                .any(|(a, b)| a.sorted_patterns() != b.sorted_patterns())
        {
            return Ok((false, format!("tau segment sets differ on instance {i}")));
        }
    }
    let pass = worst <= PRUNING_REL_TOL && tau_instances > 0;
    Ok((
        pass,
        format!(
            "50 lambda instances, {tau_instances} tau instances, worst relative deviation {worst:.3e} (tolerance {PRUNING_REL_TOL:.0e})"
        ),
    ))
}

#[test]
fn acceptance_1_pruning_exactness() {
    let (pass, detail) = crit1().unwrap_or_else(|e| (false, format!("error: {e}")));
    report(1, "pruning_exactness", pass, &detail);
}

// ---------------------------------------------------------------------------
// 2. Stationarity certified at every kink of both path types.
// ---------------------------------------------------------------------------

fn crit2() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut kinks = 0usize;
    for i in 0..20u64 {
        let m = [8, 10, 12][(i % 3) as usize];
        let zeta = [0.5, 0.9][(i % 2) as usize];
        let data = null_data(300 + i, 50, m, zeta)?;
        let y = data.y();
        let (path, lambda) = fit(&data, 3, 0.3, 0.0, true)?;
        let tol = KKT_REL_TOL * path.lambda_max;

        for kink in &path.breakpoints {
            let model = model_at(&data, kink, kink.param, 0.0, y)?;
            let res = model.kkt_residuals(&data, y, 3, true).worst(kink.param);
            worst = worst.max(res / path.lambda_max);
            kinks += 1;
            if res > tol {
                return Ok((
                    false,
                    format!("lambda kink at {} violates by {res:.3e}", kink.param),
                ));
            }
        }

        if path.model.is_empty() {
            continue;
        }
        let target = inference::test_target(&path.model, 0, y, data.sigma2())?;
        let tcfg = TauPathConfig::new(
            lambda,
            3,
            target.stat - TAU_HALF_WIDTH_SDS * target.sd,
            target.stat + TAU_HALF_WIDTH_SDS * target.sd,
        );
        let tp = tau::tau_path(&data, &target.q, &target.b, &tcfg)?;
        for kink in &tp.kinks {
            let y_tau: Vec<f64> = target
                .q
                .iter()
                .zip(&target.b)
                .map(|(q, b)| q + kink.param * b)
                .collect();
            let model = model_at(&data, kink, lambda, 0.0, &y_tau)?;
            let res = model.kkt_residuals(&data, &y_tau, 3, true).worst(lambda);
            worst = worst.max(res / path.lambda_max);
            kinks += 1;
            if res > tol {
                return Ok((
                    false,
                    format!("tau kink at {} violates by {res:.3e}", kink.param),
                ));
            }
        }
    }
    Ok((
        kinks > 0,
        format!(
            "{kinks} kinks certified, worst residual {worst:.3e} of lambda_max (tolerance {KKT_REL_TOL:.0e})"
        ),
    ))
}

#[test]
fn acceptance_2_kkt_certification() {
    let (pass, detail) = crit2().unwrap_or_else(|e| (false, format!("error: {e}")));
    report(2, "kkt_certification", pass, &detail);
}

// ---------------------------------------------------------------------------
// 3. Elastic-net paths match the augmented-design dense reference.
// ---------------------------------------------------------------------------

fn crit3() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    let mut tau_instances = 0;
    for i in 0..20u64 {
        let (m, d) = [(6u32, 3u32), (8, 3), (10, 2), (12, 2)][(i % 4) as usize];
        let ridge = [0.1, 1.0, 10.0][(i % 3) as usize];
        let data = null_data(500 + i, 40, m, zeta_for(i))?;
        let y = data.y();
        let (path, lambda) = fit(&data, d, 0.3, ridge, true)?;

        let dense = oracle::elnet_lambda_oracle(&data, d, ridge, Some(lambda), None, 150)?;
        worst = worst.max(kink_deviation(&path.breakpoints, &dense.breakpoints));
        worst = worst.max(vec_deviation(path.model.beta(), &dense.beta));
        if path.model.patterns() != dense.active.as_slice() {
            return Ok((false, format!("final active sets differ on instance {i}")));
        }

        if path.model.is_empty() {
            continue;
        }
        tau_instances += 1;
        // The ridge fit can hold more active patterns than observations, so a
        // projection-based test direction need not exist; the tau comparison
        // only needs some fixed line through y, so take a deterministic one.
        let n = y.len();
        let b: Vec<f64> = (0..n)
            .map(|t| ((t % 3) as f64 - 1.0) / (n as f64).sqrt())
            .collect();
        let scale = y.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        let (tau_min, tau_max) = (-3.0 * scale, 3.0 * scale);
        let mut tcfg = TauPathConfig::new(lambda, d, tau_min, tau_max);
        tcfg.ridge = ridge;
        tcfg.k_max = 150;
        let tp = tau::tau_path(&data, y, &b, &tcfg)?;
        let tf = oracle::elnet_tau_oracle(
            &data, d, ridge, y, &b, lambda, tau_min, tau_max, None, 150,
        )?;
        worst = worst.max(kink_deviation(&tp.kinks, &tf.kinks));
        if tp.segments.len() != tf.segments.len()
            || tp.segments.iter().zip(&tf.segments).any(|(a, b)| {
                let mut d = b.patterns.clone();
                d.sort();
                a.sorted_patterns() != d
            })
        {
            return Ok((false, format!("tau segment sets differ on instance {i}")));
        }
    }
    let pass = worst <= ELNET_REL_TOL && tau_instances > 0;
    Ok((
        pass,
        format!(
            "20 instances, {tau_instances} with tau paths, worst relative deviation {worst:.3e} (tolerance {ELNET_REL_TOL:.0e})"
        ),
    ))
}

fn zeta_for(i: u64) -> f64 {
    [0.5, 0.8][((i / 2) % 2) as usize]
}

#[test]
fn acceptance_3_elastic_net_equivalence() {
    let (pass, detail) = crit3().unwrap_or_else(|e| (false, format!("error: {e}")));
    report(3, "elastic_net_equivalence", pass, &detail);
}

// ---------------------------------------------------------------------------
// 4/5/9 share one 200-trial null calibration experiment.
// ---------------------------------------------------------------------------

fn calibration_config() -> ExperimentConfig {
    ExperimentConfig {
        trials: 200,
        synth: SynthConfig {
            n: 100,
            m: 8,
            zeta: 0.95,
            sigma: 1.0,
            model: Vec::new(),
            seed: 0,
        },
        methods: vec![Method::Homotopy, Method::Polytope, Method::DataSplit],
        d: 3,
        lambda_frac: 0.5,
        ridge: 0.0,
        alpha: ALPHA,
        k_max: 100,
        prune: true,
        seed: 20_260_821,
        max_kinks: 4000,
    }
}

fn calibration_report() -> &'static ExperimentReport {
    static REPORT: OnceLock<ExperimentReport> = OnceLock::new();
    REPORT.get_or_init(|| experiment::run(&calibration_config()))
}

// ---------------------------------------------------------------------------
// 4. False positive rate sits in the exact binomial band for every method.
// ---------------------------------------------------------------------------

fn crit4() -> Result<(bool, String)> {
    let report = calibration_report();
    let mut details = Vec::new();
    let mut pass = true;
    for summary in &report.summaries {
        let n = summary.null_p_values.len() as u64;
        if n == 0 {
            return Ok((false, format!("{} produced no null tests", summary.method)));
        }
        let hits = summary
            .null_p_values
            .iter()
            .filter(|&&p| p <= ALPHA)
            .count() as u64;
        let (lo, hi) = stats::binomial_band(n, ALPHA, BAND_CONF);
        let ok = (lo..=hi).contains(&hits);
        pass &= ok;
        details.push(format!(
            "{}: {hits}/{n} rejections, band [{lo}, {hi}]{}",
            summary.method,
            if ok { "" } else { " OUT" }
        ));
    }
    Ok((pass, details.join("; ")))
}

#[test]
fn acceptance_4_fpr_control() {
    let (pass, detail) = crit4().unwrap_or_else(|e| (false, format!("error: {e}")));
    report(4, "fpr_control", pass, &detail);
}

// ---------------------------------------------------------------------------
// 5. Pooled null p-values of the exact method pass a KS uniformity check.
// ---------------------------------------------------------------------------

fn crit5() -> Result<(bool, String)> {
    let report = calibration_report();
    let summary = report
        .summaries
        .iter()
        .find(|s| s.method == Method::Homotopy)
        .expect("homotopy summary present");
    let ps = &summary.null_p_values;
    let n = ps.len();
    if n == 0 {
        return Ok((false, "no pooled null p-values".into()));
    }
    let stat = (n as f64).sqrt() * stats::ks_distance_uniform(ps);
    Ok((
        stat < stats::KS_SQRT_N_CRIT_1PCT,
        format!(
            "sqrt(n) * D = {stat:.4} over {n} p-values (critical value {})",
            stats::KS_SQRT_N_CRIT_1PCT
        ),
    ))
}

#[test]
fn acceptance_5_null_p_uniformity() {
    let (pass, detail) = crit5().unwrap_or_else(|e| (false, format!("error: {e}")));
    report(5, "null_p_uniformity", pass, &detail);
}

// ---------------------------------------------------------------------------
// 6. The exact method dominates both baselines in power, with CIs no wider
//    than the single-interval baseline's.
// ---------------------------------------------------------------------------

fn crit6() -> Result<(bool, String)> {
    let model = synth::parse_model("0.5:1, -2:2*3, 3:4*5*6")?;
    let mut details = Vec::new();
    let mut pass = true;
    for n in [100usize, 200, 400] {
        let cfg = ExperimentConfig {
            trials: 100,
            synth: SynthConfig {
                n,
                m: 8,
                zeta: 0.5,
                sigma: 1.0,
                model: model.clone(),
                seed: 0,
            },
            methods: vec![Method::Homotopy, Method::Polytope, Method::DataSplit],
            d: 3,
            lambda_frac: 0.5,
            ridge: 0.0,
            alpha: ALPHA,
            k_max: 100,
            prune: true,
            seed: 600 + n as u64,
            max_kinks: 4000,
        };
        let report = experiment::run(&cfg);
        let get = |m: Method| {
            report
                .summaries
                .iter()
                .find(|s| s.method == m)
                .expect("summary present")
        };
        let homo = get(Method::Homotopy);
        let poly = get(Method::Polytope);
        let ds = get(Method::DataSplit);
        let t_homo = homo.tpr.unwrap_or(0.0);
        let t_poly = poly.tpr.unwrap_or(0.0);
        let t_ds = ds.tpr.unwrap_or(0.0);
        let ci_homo = homo.mean_ci_length.unwrap_or(f64::INFINITY);
        let ci_poly = poly.mean_ci_length.unwrap_or(f64::INFINITY);
        let ok = t_homo >= t_poly && t_homo >= t_ds && ci_homo <= ci_poly;
        pass &= ok;
        details.push(format!(
            "n={n}: TPR homo {t_homo:.3} poly {t_poly:.3} ds {t_ds:.3}, mean CI homo {ci_homo:.2} poly {ci_poly:.2}{}",
            if ok { "" } else { " OUT" }
        ));
    }
    Ok((pass, details.join("; ")))
}

#[test]
fn acceptance_6_power_ordering() {
    let (pass, detail) = crit6().unwrap_or_else(|e| (false, format!("error: {e}")));
    report(6, "power_ordering", pass, &detail);
}

// ---------------------------------------------------------------------------
// 7. The single-interval baseline region is contained in the exact region.
// ---------------------------------------------------------------------------

fn crit7() -> Result<(bool, String)> {
    let mut checked = 0usize;
    for i in 0..100u64 {
        let m = [6, 8][(i % 2) as usize];
        let data = null_data(700 + i, 60, m, zeta_for(i))?;
        let y = data.y();
        let (path, lambda) = fit(&data, 3, 0.4, 0.0, true)?;
        if path.model.is_empty() {
            continue;
        }
        let target = inference::test_target(&path.model, 0, y, data.sigma2())?;
        let tcfg = TauPathConfig::new(
            lambda,
            3,
            target.stat - TAU_HALF_WIDTH_SDS * target.sd,
            target.stat + TAU_HALF_WIDTH_SDS * target.sd,
        );
        let tp = tau::tau_path(&data, &target.q, &target.b, &tcfg)?;
        let region =
            inference::truncation_region(&tp.segments, &path.model.pattern_set());
        let Some(&(lo, hi)) = region
            .iter()
            .find(|&&(lo, hi)| lo <= target.stat && target.stat <= hi)
        else {
            return Ok((
                false,
                format!("observed statistic outside its region on instance {i}"),
            ));
        };

        let icfg = InferenceConfig {
            d: 3,
            lambda: Some(lambda),
            lambda_frac: None,
            ridge: 0.0,
            alpha: ALPHA,
            method: Method::Polytope,
            k_max: 150,
            prune: true,
            seed: 0,
            max_kinks: 4000,
        };
        let (plo, phi, _) =
            baselines::polytope_interval(&data, &path.model, &target, lambda, &icfg)?;
        let slack = CONTAINMENT_TOL * plo.abs().max(phi.abs()).max(1.0);
        if plo < lo - slack || phi > hi + slack {
            return Ok((
                false,
                format!(
                    "instance {i}: baseline [{plo}, {phi}] escapes exact segment [{lo}, {hi}]"
                ),
            ));
        }
        checked += 1;
    }
    Ok((
        checked >= 90,
        format!("{checked}/100 fitted instances verified (tolerance {CONTAINMENT_TOL:.0e})"),
    ))
}

#[test]
fn acceptance_7_region_containment() {
    let (pass, detail) = crit7().unwrap_or_else(|e| (false, format!("error: {e}")));
    report(7, "region_containment", pass, &detail);
}

// ---------------------------------------------------------------------------
// 8. Pruning gets relatively stronger with the order, and the absolute work
//    saturates once higher-order columns are all zero.
// ---------------------------------------------------------------------------

fn crit8() -> Result<(bool, String)> {
    let data = null_data(8888, 200, 30, 0.95)?;
    let y = data.y();
    let orders: &[u32] = &[5, 6, 7, 8, 9, 10, 12];
    let mut fractions = Vec::new();
    let mut totals = Vec::new();
    for &d in orders {
        let (path, lambda) = fit(&data, d, 0.5, 0.0, true)?;
        if path.model.is_empty() {
            return Ok((false, format!("empty selection at order {d}")));
        }
        let target = inference::test_target(&path.model, 0, y, data.sigma2())?;
        let tcfg = TauPathConfig::new(
            lambda,
            d,
            target.stat - TAU_HALF_WIDTH_SDS * target.sd,
            target.stat + TAU_HALF_WIDTH_SDS * target.sd,
        );
        let tp = tau::tau_path(&data, &target.q, &target.b, &tcfg)?;
        let sweeps = (tp.nodes_per_step.len() + 1) as f64; // step searches + init
        let per_sweep = tp.nodes_total as f64 / sweeps;
        let count = pattern_count(30, d).expect("tree size fits u128") as f64;
        fractions.push(per_sweep / count);
        totals.push(tp.nodes_total as f64);
    }

    // Relative work must shrink with the order over the growing range 5..=10.
    let decreasing = fractions.windows(2).take(5).all(|w| w[1] < w[0]);
    // Absolute work must level off between the last two orders: every column
    // a 12th-order sweep could visit beyond order 10 is identically zero.
    let last_step = (totals[6] - totals[5]).abs() / totals[5];
    let pass = decreasing && last_step < SATURATION_FRAC;
    Ok((
        pass,
        format!(
            "per-sweep node fractions {:?}, total d=10 {} vs d=12 {} (step {:.3})",
            fractions
                .iter()
                .map(|f| format!("{f:.2e}"))
                .collect::<Vec<_>>(),
            totals[5],
            totals[6],
            last_step
        ),
    ))
}

#[test]
fn acceptance_8_pruning_scaling() {
    let (pass, detail) = crit8().unwrap_or_else(|e| (false, format!("error: {e}")));
    report(8, "pruning_scaling", pass, &detail);
}

// ---------------------------------------------------------------------------
// 9. The calibration experiment is reproducible byte for byte.
// ---------------------------------------------------------------------------

fn crit9() -> Result<(bool, String)> {
    let first = io::to_json_string(calibration_report())?;
    let rerun = experiment::run(&calibration_config());
    let second = io::to_json_string(&rerun)?;
    let pass = first == second;
    Ok((
        pass,
        if pass {
            format!("two runs, {} identical bytes", first.len())
        } else {
            "reruns differ".into()
        },
    ))
}

#[test]
fn acceptance_9_determinism() {
    let (pass, detail) = crit9().unwrap_or_else(|e| (false, format!("error: {e}")));
    report(9, "determinism", pass, &detail);
}
