//! Repeated-trial experiments: draw synthetic datasets, run one or more
//! inference methods on each, and summarise error rates.
//!
//! Determinism contract: every trial's data seed and split seed derive from
//! the master seed before any work is scheduled, trials are mapped in order
//! ([`crate::exec::par_map`] preserves it), and the report carries no
//! wall-clock fields — rerunning a configuration reproduces the report byte
//! for byte, parallel or not.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::exec;
use crate::inference::{infer_all, InferenceConfig, Method};
use crate::pattern::Pattern;
use crate::synth::{self, SynthConfig};

/// Options for [`run`].
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub trials: usize,
    /// Per-trial data template (its `seed` field is ignored; seeds derive
    /// from the master seed below).
    pub synth: SynthConfig,
    pub methods: Vec<Method>,
    pub d: u32,
    /// Per-trial level rule: `lambda = lambda_frac * lambda_max(trial data)`.
    pub lambda_frac: f64,
    pub ridge: f64,
    pub alpha: f64,
    pub k_max: usize,
    pub prune: bool,
    pub seed: u64,
    pub max_kinks: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            trials: 100,
            synth: SynthConfig::default(),
            methods: vec![Method::Homotopy],
            d: 3,
            lambda_frac: 0.5,
            ridge: 0.0,
            alpha: 0.05,
            k_max: 100,
            prune: true,
            seed: 0,
            max_kinks: 10_000,
        }
    }
}

/// One tested pattern within a trial.
#[derive(Debug, Clone, Serialize)]
pub struct TrialTest {
    pub pattern: Pattern,
    /// Whether the pattern belongs to the true model.
    pub is_true: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One (trial, method) outcome.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub method: Method,
    pub data_seed: u64,
    pub selected: Vec<Pattern>,
    pub tests: Vec<TrialTest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Aggregates for one method across all trials.
#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub trials_ok: usize,
    pub trial_errors: usize,
    pub tests: usize,
    pub rejections: usize,
    /// Rejections among tests of patterns outside the true model, over the
    /// number of such tests (the conditional false positive rate).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fpr: Option<f64>,
    /// Fraction of (trial, true pattern) pairs both selected and rejected.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tpr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_ci_length: Option<f64>,
    /// Pooled p-values of null-pattern tests, in trial order (for
    /// distributional checks).
    pub null_p_values: Vec<f64>,
}

/// Full experiment output.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub summaries: Vec<MethodSummary>,
    pub trials: Vec<TrialRecord>,
}

/// Runs the experiment.  Trial failures are recorded, not propagated, so a
/// single degenerate draw cannot sink a long run.
pub fn run(cfg: &ExperimentConfig) -> ExperimentReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<(usize, u64, u64)> = (0..cfg.trials)
        .map(|t| (t, rng.gen(), rng.gen()))
        .collect();

    let true_patterns: Vec<Pattern> =
        cfg.synth.model.iter().map(|(_, p)| p.clone()).collect();

    let per_trial: Vec<Vec<TrialRecord>> = exec::par_map(seeds, |(trial, data_seed, split_seed)| {
        let data = match synth::generate(&SynthConfig {
            seed: data_seed,
            ..cfg.synth.clone()
        }) {
            Ok(d) => d,
            Err(e) => {
                return cfg
                    .methods
                    .iter()
                    .map(|&method| TrialRecord {
                        trial,
                        method,
                        data_seed,
                        selected: Vec::new(),
                        tests: Vec::new(),
                        error: Some(e.to_string()),
                    })
                    .collect();
            }
        };
        cfg.methods
            .iter()
            .map(|&method| {
                let icfg = InferenceConfig {
                    d: cfg.d,
                    lambda: None,
                    lambda_frac: Some(cfg.lambda_frac),
                    ridge: cfg.ridge,
                    alpha: cfg.alpha,
                    method,
                    k_max: cfg.k_max,
                    prune: cfg.prune,
                    seed: split_seed,
                    max_kinks: cfg.max_kinks,
                };
                match infer_all(&data, &icfg) {
                    Ok(report) => TrialRecord {
                        trial,
                        method,
                        data_seed,
                        selected: report.selected.clone(),
                        tests: report
                            .tests
                            .iter()
                            .map(|t| TrialTest {
                                pattern: t.pattern.clone(),
                                is_true: true_patterns.contains(&t.pattern),
                                p_value: t.p_value,
                                ci_lower: t.ci_lower,
                                ci_upper: t.ci_upper,
                                error: t.error.clone(),
                            })
                            .collect(),
                        error: None,
                    },
                    Err(e) => TrialRecord {
                        trial,
                        method,
                        data_seed,
                        selected: Vec::new(),
                        tests: Vec::new(),
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });
    let trials: Vec<TrialRecord> = per_trial.into_iter().flatten().collect();

    let summaries = cfg
        .methods
        .iter()
        .map(|&m| summarize(m, &trials, &true_patterns, cfg.alpha))
        .collect();

    ExperimentReport {
        config: cfg.clone(),
        summaries,
        trials,
    }
}

fn summarize(
    method: Method,
    trials: &[TrialRecord],
    true_patterns: &[Pattern],
    alpha: f64,
) -> MethodSummary {
    let mut trials_ok = 0;
    let mut trial_errors = 0;
    let mut tests = 0;
    let mut rejections = 0;
    let mut null_tests = 0;
    let mut null_rejections = 0;
    let mut detected_true = 0;
    let mut ci_sum = 0.0;
    let mut ci_count = 0usize;
    let mut null_p_values = Vec::new();

    for record in trials.iter().filter(|r| r.method == method) {
        if record.error.is_some() {
            trial_errors += 1;
            continue;
        }
        trials_ok += 1;
        for test in &record.tests {
            let Some(p) = test.p_value else { continue };
            tests += 1;
            let reject = p <= alpha;
            if reject {
                rejections += 1;
            }
            if test.is_true {
                if reject {
                    detected_true += 1;
                }
            } else {
                null_tests += 1;
                if reject {
                    null_rejections += 1;
                }
                null_p_values.push(p);
            }
            if let (Some(lo), Some(hi)) = (test.ci_lower, test.ci_upper) {
                ci_sum += hi - lo;
                ci_count += 1;
            }
        }
    }

    let true_total = trials_ok * true_patterns.len();
    MethodSummary {
        method,
        trials_ok,
        trial_errors,
        tests,
        rejections,
        fpr: (null_tests > 0).then(|| null_rejections as f64 / null_tests as f64),
        tpr: (true_total > 0).then(|| detected_true as f64 / true_total as f64),
        mean_ci_length: (ci_count > 0).then(|| ci_sum / ci_count as f64),
        null_p_values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::to_json_string;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            trials: 4,
            synth: SynthConfig {
                n: 40,
                m: 5,
                zeta: 0.6,
                sigma: 1.0,
                model: synth::parse_model("1.5:1, -2:2*3").unwrap(),
                seed: 0,
            },
            methods: vec![Method::Homotopy, Method::DataSplit],
            d: 2,
            lambda_frac: 0.4,
            ridge: 0.0,
            alpha: 0.05,
            k_max: 40,
            prune: true,
            seed: 11,
            max_kinks: 10_000,
        }
    }

    #[test]
    fn reports_are_byte_identical_across_reruns() {
        let cfg = small_config();
        let a = to_json_string(&run(&cfg)).unwrap();
        let b = to_json_string(&run(&cfg)).unwrap();
        assert_eq!(a, b);
        assert!(!a.contains("time"), "no wall-clock fields in reports");
    }

    #[test]
    fn summaries_count_what_the_trials_contain() {
        let cfg = small_config();
        let report = run(&cfg);
        assert_eq!(report.trials.len(), cfg.trials * cfg.methods.len());
        for summary in &report.summaries {
            assert_eq!(summary.trials_ok + summary.trial_errors, cfg.trials);
            let manual: usize = report
                .trials
                .iter()
                .filter(|r| r.method == summary.method && r.error.is_none())
                .flat_map(|r| &r.tests)
                .filter(|t| t.p_value.is_some_and(|p| p <= cfg.alpha))
                .count();
            assert_eq!(summary.rejections, manual);
        }
    }

    #[test]
    fn different_master_seeds_give_different_data() {
        let cfg = small_config();
        let a = run(&cfg);
        let b = run(&ExperimentConfig { seed: 12, ..cfg });
        assert_ne!(
            a.trials[0].data_seed, b.trials[0].data_seed,
            "master seed must drive trial seeds"
        );
    }
}
