//! Conditional (selective) inference for the patterns the path selects.
//!
//! For each selected pattern the test statistic is the least-squares
//! functional `eta'y` with `eta = X_A (X_A'X_A)^{-1} e_j`: the coefficient
//! of the pattern in the projection of the mean onto the selected design.
//! Under the model `y ~ N(mu, sigma^2 I)` the statistic is Gaussian; valid
//! inference after selection conditions on the event that the path selected
//! exactly this pattern set.  Along the line `y(tau) = q + tau * b` with
//! `b = eta / (eta'eta)` and `q = y - b * (eta'y)`, the statistic equals
//! `tau` itself, so the conditioning event is a union of `tau`-segments of
//! the conditioning path whose active set matches the observed one — an
//! exact region, found by [`crate::tau::tau_path`] without enumerating the
//! pattern space.
//!
//! P-values are two-sided truncated-normal tails at mean zero; confidence
//! intervals invert the same family by bisection over the mean, using the
//! strict monotonicity of the truncated cdf in its mean.

use serde::{Deserialize, Serialize};

use crate::active::ActiveModel;
use crate::baselines;
use crate::data::Dataset;
use crate::error::Error;
use crate::lasso::{self, LambdaPathConfig};
use crate::pattern::Pattern;
use crate::tau::{self, TauPathConfig, TauSegment};
use crate::truncnorm::{truncated_cdf, truncated_tails};
use crate::vecops::dot;
use crate::Result;

/// Working half-width of the conditioning path, in statistic standard
/// deviations around the observed statistic.  Both the homotopy and the
/// polytope regions are intersected with this range.
pub const TAU_HALF_WIDTH_SDS: f64 = 20.0;
/// How far confidence-interval bisection may bracket the mean, in statistic
/// standard deviations.  A bounded truncation region pushes an endpoint to
/// roughly `sd^2 * ln(1/alpha) / gap` past the region, where `gap` is the
/// statistic's distance to the region boundary, so the bracket must be able
/// to grow far beyond the region itself; every evaluation is a log-space
/// tail, stable at any distance.
pub const CI_BRACKET_SDS: f64 = 1e6;
/// A confidence endpoint must reproduce its target tail mass this closely.
pub const CI_TARGET_RESIDUAL: f64 = 1e-8;

/// How the conditioning event is characterised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Exact region via the conditioning path (the primary method).
    Homotopy,
    /// Single-interval region from the sign-pattern polytope (conservative).
    Polytope,
    /// Selection and inference on disjoint halves (no conditioning needed).
    DataSplit,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "homo" | "homotopy" => Ok(Method::Homotopy),
            "poly" | "polytope" => Ok(Method::Polytope),
            "ds" | "split" | "data_split" | "data-split" => Ok(Method::DataSplit),
            other => Err(Error::Input(format!(
                "unknown method '{other}' (expected homo, poly, or ds)"
            ))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Homotopy => "homo",
            Method::Polytope => "poly",
            Method::DataSplit => "ds",
        })
    }
}

/// Options for [`infer_all`].
#[derive(Debug, Clone)]
pub struct InferenceConfig {
    pub d: u32,
    /// Explicit regularisation level; wins over `lambda_frac`.
    pub lambda: Option<f64>,
    /// Level as a fraction of `lambda_max` (default 0.01).
    pub lambda_frac: Option<f64>,
    pub ridge: f64,
    /// Two-sided significance level for tests and CI coverage.
    pub alpha: f64,
    pub method: Method,
    pub k_max: usize,
    pub prune: bool,
    /// Only data splitting consumes randomness (the row shuffle).
    pub seed: u64,
    pub max_kinks: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            d: 3,
            lambda: None,
            lambda_frac: None,
            ridge: 0.0,
            alpha: 0.05,
            method: Method::Homotopy,
            k_max: 100,
            prune: true,
            seed: 0,
            max_kinks: 10_000,
        }
    }
}

/// A pattern's test functional and the response line it induces.
#[derive(Debug, Clone)]
pub struct TestTarget {
    pub pattern: Pattern,
    /// `eta` with `eta'y` the statistic.
    pub eta: Vec<f64>,
    pub stat: f64,
    /// Standard deviation of the statistic, `sigma * |eta|`.
    pub sd: f64,
    /// Line direction `eta / (eta'eta)`, so the statistic moves one-for-one
    /// with `tau`.
    pub b: Vec<f64>,
    /// Line offset `y - b * stat` (statistic zero there).
    pub q: Vec<f64>,
}

/// Builds the test target for the `idx`-th active pattern.  The functional
/// always uses the plain (unridged) Gram matrix: the target is the
/// projected mean, regardless of how the selection was regularised.
pub fn test_target(
    model: &ActiveModel,
    idx: usize,
    y: &[f64],
    sigma2: f64,
) -> Result<TestTarget> {
    let eta = model.ls_target_direction(idx)?;
    let ete = dot(&eta, &eta);
    if !(ete > 0.0 && ete.is_finite()) {
        return Err(Error::Degeneracy {
            pattern: model.patterns()[idx].to_string(),
        });
    }
    let stat = dot(&eta, y);
    let sd = (sigma2 * ete).sqrt();
    let b: Vec<f64> = eta.iter().map(|e| e / ete).collect();
    let q: Vec<f64> = y.iter().zip(&b).map(|(yi, bi)| yi - bi * stat).collect();
    Ok(TestTarget {
        pattern: model.patterns()[idx].clone(),
        eta,
        stat,
        sd,
        b,
        q,
    })
}

/// Union of `tau`-segments whose active pattern set equals the observed one
/// (signs and selection order ignored), with adjacent matches merged.
pub fn truncation_region(segments: &[TauSegment], observed: &[Pattern]) -> Vec<(f64, f64)> {
    let mut obs = observed.to_vec();
    obs.sort();
    let mut out: Vec<(f64, f64)> = Vec::new();
    for seg in segments {
        if seg.sorted_patterns() == obs {
            match out.last_mut() {
                Some(last) if last.1 == seg.lo => last.1 = seg.hi,
                _ => out.push((seg.lo, seg.hi)),
            }
        }
    }
    out
}

/// Two-sided selective p-value for mean zero.
pub fn selective_p(stat: f64, sd: f64, region: &[(f64, f64)]) -> Result<f64> {
    let (cdf, sf) = truncated_tails(stat, 0.0, sd, region)?;
    Ok((2.0 * cdf.min(sf)).min(1.0))
}

/// Equal-tailed `1 - alpha` confidence interval for the projected mean,
/// inverting the truncated-normal family by bisection over its mean.
pub fn selective_ci(
    stat: f64,
    sd: f64,
    region: &[(f64, f64)],
    alpha: f64,
) -> Result<(f64, f64)> {
    let lower = solve_mean(stat, sd, region, 1.0 - alpha / 2.0)?;
    let upper = solve_mean(stat, sd, region, alpha / 2.0)?;
    Ok((lower, upper))
}

/// The mean at which the truncated cdf of `stat` equals `target`.  The cdf
/// is strictly decreasing in the mean, so bisection applies once a bracket
/// is found; brackets expand to [`CI_BRACKET_SDS`] before giving up.
fn solve_mean(stat: f64, sd: f64, region: &[(f64, f64)], target: f64) -> Result<f64> {
    let g = |mu: f64| truncated_cdf(stat, mu, sd, region);
    let mut width = 5.0;
    let (mut lo, mut hi) = loop {
        let lo = stat - width * sd;
        let hi = stat + width * sd;
        let g_lo = g(lo)?;
        let g_hi = g(hi)?;
        if g_lo >= target && g_hi <= target {
            break (lo, hi);
        }
        if width >= CI_BRACKET_SDS {
            return Err(Error::Numerical(format!(
                "confidence bound not bracketed within {CI_BRACKET_SDS:.0e} sds \
                 (tail mass {target} unreachable; statistic numerically at a \
                 region boundary)"
            )));
        }
        width = (width * 2.0).min(CI_BRACKET_SDS);
    };
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        if g(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let residual = (g(mid)? - target).abs();
    if residual > CI_TARGET_RESIDUAL {
        return Err(Error::Numerical(format!(
            "confidence endpoint residual {residual:.3e} exceeds {CI_TARGET_RESIDUAL:.0e}"
        )));
    }
    Ok(mid)
}

/// Inference outcome for one selected pattern.  `error` captures
/// pattern-level failures (degenerate target, unreachable bracket) without
/// poisoning the rest of the report.
#[derive(Debug, Clone, Serialize)]
pub struct PatternTest {
    pub pattern: Pattern,
    pub sign: f64,
    /// Path coefficient at the selection level (for data splitting, the
    /// held-out least-squares coefficient).
    pub beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci_upper: Option<f64>,
    /// Truncation region in statistic space (empty until computed;
    /// unbounded endpoints serialise as null).
    pub region: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kinks: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Full inference report for one dataset and method.
#[derive(Debug, Clone, Serialize)]
pub struct InferenceReport {
    pub method: Method,
    pub lambda: f64,
    pub lambda_max: f64,
    pub alpha: f64,
    pub sigma2: f64,
    pub selected: Vec<Pattern>,
    pub signs: Vec<f64>,
    pub beta: Vec<f64>,
    pub tests: Vec<PatternTest>,
    /// Tree nodes spent selecting (the regularisation path).
    pub selection_nodes: u64,
    /// Tree nodes spent characterising conditioning events.
    pub inference_nodes: u64,
}

pub(crate) fn resolve_lambda(cfg: &InferenceConfig, lambda_max: f64) -> Result<f64> {
    let lambda = match cfg.lambda {
        Some(l) => l,
        None => cfg.lambda_frac.unwrap_or(0.01) * lambda_max,
    };
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Input(format!(
            "resolved lambda must be positive and finite, got {lambda}"
        )));
    }
    Ok(lambda)
}

/// Selects at the resolved level and tests every selected pattern with the
/// requested method.
pub fn infer_all(data: &Dataset, cfg: &InferenceConfig) -> Result<InferenceReport> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(Error::Input(format!(
            "alpha must lie strictly between 0 and 1, got {}",
            cfg.alpha
        )));
    }
    if cfg.method == Method::DataSplit {
        return baselines::data_split_inference(data, cfg);
    }

    let y = data.y();
    let (lambda_max, _, _) = lasso::lambda_max(data, y, cfg.d)?;
    let lambda = resolve_lambda(cfg, lambda_max)?;
    let lcfg = LambdaPathConfig {
        d: cfg.d,
        lambda_target: Some(lambda),
        ridge: cfg.ridge,
        k_max: cfg.k_max,
        prune: cfg.prune,
        max_kinks: cfg.max_kinks,
    };
    let path = lasso::lambda_path(data, y, &lcfg)?;
    let model = &path.model;

    let mut tests = Vec::with_capacity(model.len());
    let mut inference_nodes = 0u64;
    for idx in 0..model.len() {
        let pattern = model.patterns()[idx].clone();
        let sign = model.signs()[idx];
        let beta = model.beta()[idx];
        match test_one(data, model, idx, lambda, cfg, &mut inference_nodes) {
            Ok(test) => tests.push(test),
            Err(e) => tests.push(PatternTest {
                pattern,
                sign,
                beta,
                stat: None,
                sd: None,
                p_value: None,
                ci_lower: None,
                ci_upper: None,
                region: Vec::new(),
                kinks: None,
                nodes: None,
                error: Some(e.to_string()),
            }),
        }
    }

    Ok(InferenceReport {
        method: cfg.method,
        lambda,
        lambda_max,
        alpha: cfg.alpha,
        sigma2: data.sigma2(),
        selected: model.patterns().to_vec(),
        signs: model.signs().to_vec(),
        beta: model.beta().to_vec(),
        tests,
        selection_nodes: path.nodes_total,
        inference_nodes,
    })
}

fn test_one(
    data: &Dataset,
    model: &ActiveModel,
    idx: usize,
    lambda: f64,
    cfg: &InferenceConfig,
    inference_nodes: &mut u64,
) -> Result<PatternTest> {
    let target = test_target(model, idx, data.y(), data.sigma2())?;
    let tau_min = target.stat - TAU_HALF_WIDTH_SDS * target.sd;
    let tau_max = target.stat + TAU_HALF_WIDTH_SDS * target.sd;

    let (region, kinks, nodes) = match cfg.method {
        Method::Homotopy => {
            let tcfg = TauPathConfig {
                lambda,
                d: cfg.d,
                ridge: cfg.ridge,
                k_max: cfg.k_max,
                prune: cfg.prune,
                tau_min,
                tau_max,
                max_kinks: cfg.max_kinks,
            };
            let path = tau::tau_path(data, &target.q, &target.b, &tcfg)?;
            let region = truncation_region(&path.segments, model.patterns());
            (region, Some(path.kinks.len()), path.nodes_total)
        }
        Method::Polytope => {
            let (lo, hi, nodes) =
                baselines::polytope_interval(data, model, &target, lambda, cfg)?;
            (vec![(lo, hi)], None, nodes)
        }
        Method::DataSplit => unreachable!("dispatched before selection"),
    };
    *inference_nodes += nodes;

    if !region
        .iter()
        .any(|&(lo, hi)| lo <= target.stat && target.stat <= hi)
    {
        return Err(Error::Numerical(format!(
            "observed statistic {} fell outside its own truncation region",
            target.stat
        )));
    }

    let p_value = selective_p(target.stat, target.sd, &region)?;
    // A failed interval inversion (unreachable bracket) degrades the test to
    // p-value-only instead of discarding it.
    let (ci_lower, ci_upper, error) =
        match selective_ci(target.stat, target.sd, &region, cfg.alpha) {
            Ok((lo, hi)) => (Some(lo), Some(hi), None),
            Err(e) => (None, None, Some(e.to_string())),
        };
    Ok(PatternTest {
        pattern: target.pattern,
        sign: model.signs()[idx],
        beta: model.beta()[idx],
        stat: Some(target.stat),
        sd: Some(target.sd),
        p_value: Some(p_value),
        ci_lower,
        ci_upper,
        region,
        kinks,
        nodes: Some(nodes),
        error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::distribution::{ContinuousCDF, Normal};

    /// One orthonormal column: the selective machinery reduces to the
    /// soft-threshold truncation {|tau| > lambda}, which is computable by
    /// hand with the plain normal cdf.
    #[test]
    fn one_column_matches_closed_form() {
        let data = Dataset::new(
            vec![vec![1.0, 0.0, 0.0]],
            vec![2.0, 0.0, 0.0],
            1.0,
        )
        .unwrap();
        let cfg = InferenceConfig {
            d: 1,
            lambda: Some(1.0),
            ..InferenceConfig::default()
        };
        let report = infer_all(&data, &cfg).unwrap();
        assert_eq!(report.selected, vec![Pattern::singleton(1)]);
        let test = &report.tests[0];
        assert!(test.error.is_none(), "{:?}", test.error);
        assert_relative_eq!(test.stat.unwrap(), 2.0, max_relative = 1e-12);
        assert_relative_eq!(test.sd.unwrap(), 1.0, max_relative = 1e-12);

        // Region: [-18, -1] and [1, 22] (working range stat +- 20 sds).
        assert_eq!(test.region.len(), 2);
        assert_relative_eq!(test.region[0].0, -18.0, max_relative = 1e-9);
        assert_relative_eq!(test.region[0].1, -1.0, max_relative = 1e-9);
        assert_relative_eq!(test.region[1].0, 1.0, max_relative = 1e-9);
        assert_relative_eq!(test.region[1].1, 22.0, max_relative = 1e-9);

        let normal = Normal::new(0.0, 1.0).unwrap();
        let m_lo = normal.cdf(-1.0) - normal.cdf(-18.0);
        let m_hi = normal.cdf(22.0) - normal.cdf(1.0);
        let below = m_lo + normal.cdf(2.0) - normal.cdf(1.0);
        let above = normal.cdf(22.0) - normal.cdf(2.0);
        let expect_p = 2.0 * (below / (m_lo + m_hi)).min(above / (m_lo + m_hi));
        assert_relative_eq!(test.p_value.unwrap(), expect_p, max_relative = 1e-9);
    }

    #[test]
    fn ci_endpoints_invert_the_family() {
        let data = Dataset::new(
            vec![vec![1.0, 0.0, 0.0]],
            vec![2.0, 0.0, 0.0],
            1.0,
        )
        .unwrap();
        let cfg = InferenceConfig {
            d: 1,
            lambda: Some(1.0),
            alpha: 0.1,
            ..InferenceConfig::default()
        };
        let report = infer_all(&data, &cfg).unwrap();
        let test = &report.tests[0];
        let (lo, hi) = (test.ci_lower.unwrap(), test.ci_upper.unwrap());
        assert!(lo < hi);
        let f_lo = truncated_cdf(2.0, lo, 1.0, &test.region).unwrap();
        let f_hi = truncated_cdf(2.0, hi, 1.0, &test.region).unwrap();
        assert_relative_eq!(f_lo, 0.95, epsilon = 1e-8);
        assert_relative_eq!(f_hi, 0.05, epsilon = 1e-8);
    }

    #[test]
    fn region_merging_ignores_signs_and_order() {
        let segments = vec![
            TauSegment {
                lo: 0.0,
                hi: 1.0,
                patterns: vec![Pattern::singleton(2), Pattern::singleton(1)],
                signs: vec![1.0, -1.0],
                beta_lo: vec![0.0, 0.0],
                nu: vec![0.0, 0.0],
            },
            TauSegment {
                lo: 1.0,
                hi: 2.0,
                patterns: vec![Pattern::singleton(1), Pattern::singleton(2)],
                signs: vec![1.0, 1.0],
                beta_lo: vec![0.0, 0.0],
                nu: vec![0.0, 0.0],
            },
            TauSegment {
                lo: 2.0,
                hi: 3.0,
                patterns: vec![Pattern::singleton(1)],
                signs: vec![1.0],
                beta_lo: vec![0.0],
                nu: vec![0.0],
            },
            TauSegment {
                lo: 3.0,
                hi: 4.0,
                patterns: vec![Pattern::singleton(1), Pattern::singleton(2)],
                signs: vec![1.0, 1.0],
                beta_lo: vec![0.0, 0.0],
                nu: vec![0.0, 0.0],
            },
        ];
        let observed = vec![Pattern::singleton(2), Pattern::singleton(1)];
        let region = truncation_region(&segments, &observed);
        assert_eq!(region, vec![(0.0, 2.0), (3.0, 4.0)]);
    }

    #[test]
    fn p_values_land_in_the_unit_interval() {
        let region = [(-5.0, -0.5), (0.5, 6.0)];
        for &stat in &[0.6, 1.0, 3.0, 5.5, -0.7, -4.0] {
            let p = selective_p(stat, 1.0, &region).unwrap();
            assert!((0.0..=1.0).contains(&p), "p = {p} at stat {stat}");
        }
    }

    #[test]
    fn method_names_parse() {
        assert_eq!("homo".parse::<Method>().unwrap(), Method::Homotopy);
        assert_eq!("poly".parse::<Method>().unwrap(), Method::Polytope);
        assert_eq!("ds".parse::<Method>().unwrap(), Method::DataSplit);
        assert!("bogus".parse::<Method>().is_err());
    }
}
