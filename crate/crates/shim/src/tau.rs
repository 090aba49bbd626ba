//! The conditioning path: active-set evolution of the fit along a line of
//! responses `y(tau) = q + tau * b` at a fixed regularisation level.
//!
//! Selective inference needs to know, for every `tau` in a working range,
//! which patterns the lasso would select when fit to `y(tau)`.  Because the
//! fit is piecewise linear in `tau`, the range splits into segments with a
//! constant active set, separated by kinks where a pattern enters or leaves.
//! Kinks are found with the same branch-and-bound tree search as the
//! regularisation path, so the full pattern space is scanned implicitly at
//! every step.
//!
//! The path starts from a regularisation path fit at `y(tau_min)` traced
//! down to the target level, then walks `tau` upward.  Unlike the
//! regularisation path, the active set here may legitimately become (or
//! start) empty: the fit is then identically zero and the next event is the
//! first inclusion.

use std::collections::HashSet;

use crate::active::ActiveModel;
use crate::data::Dataset;
use crate::error::Error;
use crate::lasso::{self, LambdaPathConfig};
use crate::path::{
    boundary_step, columns_equal, deletion_step, AliasLog, Breakpoint, PathEvent, SPAN_RTOL,
    TIE_REL,
};
use crate::pattern::{feature_column, min_step_search, Pattern, SearchContext};
use crate::vecops::dot;
use crate::Result;

/// Options for [`tau_path`].
#[derive(Debug, Clone)]
pub struct TauPathConfig {
    /// Fixed regularisation level the path conditions on.
    pub lambda: f64,
    /// Maximum interaction order.
    pub d: u32,
    /// Elastic-net ridge weight (0 for the plain lasso).
    pub ridge: f64,
    /// Hard cap on the active set size (a refusal, not a stopping rule).
    pub k_max: usize,
    /// Disable to enumerate the full tree at every step (reference mode).
    pub prune: bool,
    /// Working range of the statistic.
    pub tau_min: f64,
    pub tau_max: f64,
    /// Safety valve against stalled paths.
    pub max_kinks: usize,
}

impl TauPathConfig {
    pub fn new(lambda: f64, d: u32, tau_min: f64, tau_max: f64) -> Self {
        TauPathConfig {
            lambda,
            d,
            ridge: 0.0,
            k_max: 100,
            prune: true,
            tau_min,
            tau_max,
            max_kinks: 10_000,
        }
    }
}

/// A maximal interval of `tau` with a constant active set.
///
/// Coefficients on the segment are affine: `beta(tau) = beta_lo + (tau - lo) * nu`.
#[derive(Debug, Clone)]
pub struct TauSegment {
    pub lo: f64,
    pub hi: f64,
    pub patterns: Vec<Pattern>,
    pub signs: Vec<f64>,
    pub beta_lo: Vec<f64>,
    pub nu: Vec<f64>,
}

impl TauSegment {
    /// Active patterns sorted lexicographically (selection order forgotten),
    /// the identity under which segments are compared and merged.
    pub fn sorted_patterns(&self) -> Vec<Pattern> {
        let mut p = self.patterns.clone();
        p.sort();
        p
    }
}

/// A computed conditioning path.
#[derive(Debug, Clone)]
pub struct TauPathResult {
    pub lambda: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    /// Kinks strictly inside `(tau_min, tau_max)`, increasing.
    pub kinks: Vec<Breakpoint>,
    /// Consecutive segments covering `[tau_min, tau_max]`.
    pub segments: Vec<TauSegment>,
    /// Tree nodes evaluated per step search (initialisation excluded).
    pub nodes_per_step: Vec<u64>,
    /// Nodes spent initialising at `y(tau_min)`.
    pub init_nodes: u64,
    /// Grand total including initialisation.
    pub nodes_total: u64,
    /// `(duplicate, active)` pattern pairs excluded from inclusion.
    pub aliases: Vec<(Pattern, Pattern)>,
}

fn line_point(q: &[f64], b: &[f64], tau: f64) -> Vec<f64> {
    q.iter().zip(b).map(|(qi, bi)| qi + tau * bi).collect()
}

/// Plans the next event walking `tau` upward; `model` must be refit at
/// `y(tau)` and carry the fixed lambda.
#[allow(clippy::too_many_arguments)]
fn plan_tau_step(
    data: &Dataset,
    q: &[f64],
    b: &[f64],
    tau: f64,
    model: &ActiveModel,
    d: u32,
    prune: bool,
    tie_tol: f64,
    seed_remaining: f64,
    just_included: Option<usize>,
    blocked: &[Pattern],
    aliases: &mut AliasLog,
) -> (lasso::StepPlan, Vec<f64>) {
    let lambda = model.lambda();
    let ridge = model.ridge();
    let y_tau = line_point(q, b, tau);
    let nu = model.tau_direction(b);
    let w = model.residual(&y_tau);
    let v = model.image(&nu);

    let (d_del, del_idx) = deletion_step(model.beta(), &nu, model.patterns(), just_included, tie_tol);

    // Prune threshold: every active pattern keeps |correlation| = lambda, so
    // after a step of size `delta` the boundary is still at least
    // |rho_k| - delta * (|theta_k| + |eta_k|) for any active k; an empty
    // active set pins the boundary at lambda itself.
    let active_stats: Vec<(f64, f64)> = (0..model.len())
        .map(|k| {
            let col = model.column(k);
            let a = (dot(col, &w) - ridge * model.beta()[k]).abs();
            let c = dot(col, b).abs() + (dot(col, &v) + ridge * nu[k]).abs();
            (a, c)
        })
        .collect();
    let prune_rhs = move |cut: f64| {
        if active_stats.is_empty() {
            lambda
        } else {
            active_stats
                .iter()
                .map(|&(a, c)| a - cut * c)
                .fold(f64::NEG_INFINITY, f64::max)
        }
    };

    let active: HashSet<&[u32]> = model.patterns().iter().map(|p| p.indices()).collect();
    // Duplicates of active columns never re-enter, at any ridge; see the
    // matching rule in the lambda planner.
    let skip = |pat: &[u32], col: &[f64]| -> bool {
        if active.contains(pat) {
            return true;
        }
        if blocked.iter().any(|p| p.indices() == pat) {
            return true;
        }
        for k in 0..model.len() {
            if columns_equal(model.column(k), col) {
                aliases.record(Pattern::from_slice(pat), model.patterns()[k].clone());
                return true;
            }
        }
        false
    };

    let ctx = SearchContext {
        data,
        d,
        w: &w,
        v: if model.is_empty() { None } else { Some(&v) },
        b: Some(b),
        prune,
    };
    // Inactive correlations move with slope gamma = theta - eta; the first
    // boundary hit is at lambda * sign(gamma).
    let step_rule = |_pat: &[u32], stats: &crate::pattern::NodeStats| -> (f64, f64) {
        let gamma = stats.theta - stats.eta;
        if gamma == 0.0 {
            return (f64::INFINITY, 1.0);
        }
        let sign = gamma.signum();
        // The boundary band lives in correlation units, like `lambda` itself,
        // while this path's tie tolerance is in tau units.  A just-deleted
        // pattern sits exactly on the boundary; the band keeps its
        // roundoff-level drift out while letting a genuine outward turn
        // re-enter after a band-sized step.
        let band = TIE_REL * lambda;
        let delta = if gamma > 0.0 {
            boundary_step(lambda - stats.rho, gamma, band)
        } else {
            boundary_step(lambda + stats.rho, -gamma, band)
        };
        (delta, sign)
    };
    let seed = d_del.min(seed_remaining);
    let inc = min_step_search(&ctx, seed, tie_tol, skip, step_rule, prune_rhs);

    let deletion_wins = d_del <= inc.delta + tie_tol;
    let plan = if deletion_wins && d_del.is_finite() {
        lasso::StepPlan {
            delta: d_del,
            event: Some(lasso::PlannedEvent::Delete {
                index: del_idx.expect("finite deletion step has an index"),
            }),
            nodes: inc.nodes,
        }
    } else if inc.delta.is_finite() {
        lasso::StepPlan {
            delta: inc.delta,
            event: Some(lasso::PlannedEvent::Include {
                pattern: inc.pattern.expect("finite inclusion step has a pattern"),
                sign: inc.sign,
            }),
            nodes: inc.nodes,
        }
    } else {
        lasso::StepPlan {
            delta: f64::INFINITY,
            event: None,
            nodes: inc.nodes,
        }
    };
    (plan, nu)
}

/// Computes the next event of the conditioning path from a refit model
/// state, without executing it.  Exposed for step-level verification.
pub fn tau_step(
    data: &Dataset,
    q: &[f64],
    b: &[f64],
    tau: f64,
    model: &mut ActiveModel,
    d: u32,
    prune: bool,
) -> Result<lasso::StepPlan> {
    let y_tau = line_point(q, b, tau);
    model.refit(&y_tau)?;
    let tie_tol = TIE_REL;
    let mut aliases = AliasLog::default();
    let (plan, _) = plan_tau_step(
        data,
        q,
        b,
        tau,
        model,
        d,
        prune,
        tie_tol,
        f64::INFINITY,
        None,
        &[],
        &mut aliases,
    );
    Ok(plan)
}

/// Traces the active set of the fixed-`lambda` fit to `y(tau) = q + tau * b`
/// over `tau` in `[tau_min, tau_max]`.
pub fn tau_path(data: &Dataset, q: &[f64], b: &[f64], cfg: &TauPathConfig) -> Result<TauPathResult> {
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::Input(format!(
            "lambda must be positive and finite, got {}",
            cfg.lambda
        )));
    }
    if cfg.d == 0 {
        return Err(Error::Input("interaction order must be at least 1".into()));
    }
    if !(cfg.ridge >= 0.0 && cfg.ridge.is_finite()) {
        return Err(Error::Input(format!(
            "ridge weight must be finite and non-negative, got {}",
            cfg.ridge
        )));
    }
    if cfg.k_max == 0 {
        return Err(Error::Input("k_max must be at least 1".into()));
    }
    if q.len() != data.n() || b.len() != data.n() {
        return Err(Error::Input(format!(
            "response line has {} + tau * {} entries, design has {} rows",
            q.len(),
            b.len(),
            data.n()
        )));
    }
    if !(cfg.tau_min < cfg.tau_max)
        || !cfg.tau_min.is_finite()
        || !cfg.tau_max.is_finite()
    {
        return Err(Error::Input(format!(
            "tau range [{}, {}] must be finite and increasing",
            cfg.tau_min, cfg.tau_max
        )));
    }

    // Initialise at y(tau_min) by tracing the regularisation path down to
    // the fixed level.  A response so small that nothing reaches the level
    // (or a zero response) starts the walk with an empty active set.
    let y_lo = line_point(q, b, cfg.tau_min);
    let lcfg = LambdaPathConfig {
        d: cfg.d,
        lambda_target: Some(cfg.lambda),
        ridge: cfg.ridge,
        k_max: cfg.k_max,
        prune: cfg.prune,
        max_kinks: cfg.max_kinks,
    };
    let (mut model, init_nodes) = match lasso::lambda_path(data, &y_lo, &lcfg) {
        Ok(path) => (path.model, path.nodes_total),
        Err(Error::Input(_)) => (ActiveModel::new(cfg.lambda, cfg.ridge), 0),
        Err(e) => return Err(e),
    };
    model.set_lambda(cfg.lambda);
    model.refit(&y_lo)?;

    let tie_tol = TIE_REL * (cfg.tau_max - cfg.tau_min).max(1.0);
    let mut tau = cfg.tau_min;
    let mut kinks: Vec<Breakpoint> = Vec::new();
    let mut segments: Vec<TauSegment> = Vec::new();
    let mut nodes_per_step: Vec<u64> = Vec::new();
    let mut nodes_total = init_nodes;
    let mut aliases = AliasLog::default();
    let mut just_included: Option<usize> = None;
    // Patterns found linearly dependent on the active set; excluded from
    // selection until a deletion shrinks the span and may break the
    // dependence.  Inclusions only grow the span, so blocks persist.
    let mut span_blocked: Vec<Pattern> = Vec::new();

    loop {
        if kinks.len() >= cfg.max_kinks {
            return Err(Error::Numerical(format!(
                "tau path exceeded {} kinks at tau = {tau}",
                cfg.max_kinks
            )));
        }
        let remaining = cfg.tau_max - tau;
        let (plan, nu) = plan_tau_step(
            data,
            q,
            b,
            tau,
            &model,
            cfg.d,
            cfg.prune,
            tie_tol,
            remaining,
            just_included,
            &span_blocked,
            &mut aliases,
        );
        nodes_per_step.push(plan.nodes);
        nodes_total += plan.nodes;
        if plan.delta >= remaining - tie_tol {
            segments.push(TauSegment {
                lo: tau,
                hi: cfg.tau_max,
                patterns: model.patterns().to_vec(),
                signs: model.signs().to_vec(),
                beta_lo: model.beta().to_vec(),
                nu,
            });
            break;
        }
        // A column inside the active span rides the boundary with a pinned
        // correlation, so any crossing it appears to win is a quotient of
        // roundoff noise and including it would make the Gram singular.
        // Reject it before advancing tau and replan from the same state.
        if model.ridge() == 0.0 && !model.is_empty() {
            if let Some(lasso::PlannedEvent::Include { ref pattern, .. }) = plan.event {
                let col = feature_column(data, pattern);
                if model.span_residual(&col) <= SPAN_RTOL {
                    span_blocked.push(pattern.clone());
                    continue;
                }
            }
        }
        let tau_next = tau + plan.delta;
        segments.push(TauSegment {
            lo: tau,
            hi: tau_next,
            patterns: model.patterns().to_vec(),
            signs: model.signs().to_vec(),
            beta_lo: model.beta().to_vec(),
            nu,
        });
        let y_next = line_point(q, b, tau_next);
        just_included = None;
        match plan.event.expect("finite step always carries an event") {
            lasso::PlannedEvent::Delete { index } => {
                span_blocked.clear();
                let pattern = model.remove(index);
                model.refit(&y_next)?;
                kinks.push(Breakpoint {
                    param: tau_next,
                    event: PathEvent::Delete,
                    pattern: pattern.clone(),
                    active_after: model.patterns().to_vec(),
                    signs_after: model.signs().to_vec(),
                    beta_after: model.beta().to_vec(),
                });
            }
            lasso::PlannedEvent::Include { pattern, sign } => {
                if model.len() + 1 > cfg.k_max {
                    return Err(Error::CapExceeded(format!(
                        "active set would exceed k_max = {} at tau = {tau_next}",
                        cfg.k_max
                    )));
                }
                let col = feature_column(data, &pattern);
                model.include(pattern.clone(), col, sign);
                model.refit(&y_next)?;
                kinks.push(Breakpoint {
                    param: tau_next,
                    event: PathEvent::Include,
                    pattern: pattern.clone(),
                    active_after: model.patterns().to_vec(),
                    signs_after: model.signs().to_vec(),
                    beta_after: model.beta().to_vec(),
                });
                just_included = Some(model.len() - 1);
            }
        }
        tau = tau_next;
    }

    Ok(TauPathResult {
        lambda: cfg.lambda,
        tau_min: cfg.tau_min,
        tau_max: cfg.tau_max,
        kinks,
        segments,
        nodes_per_step,
        init_nodes,
        nodes_total,
        aliases: aliases.pairs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use approx::assert_relative_eq;

    fn dataset(cols: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
        Dataset::new(cols, y, 1.0).unwrap()
    }

    fn fixture(seed: u64, n: usize, m: u32, density: f64) -> Dataset {
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let cols: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                (0..n)
                    .map(|_| if next() < density { next() } else { 0.0 })
                    .collect()
            })
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let z = |j: usize| cols[j][i];
                1.5 * z(0) - 2.0 * z(1) * z(2) + 2.5 * z(0) * z(3) + (next() - 0.5)
            })
            .collect();
        dataset(cols, y)
    }

    #[test]
    fn single_column_inclusion_kink() {
        // q = 0, b = e1-direction response: correlation with the only column
        // is tau * x'b; it reaches lambda = 0.1 at tau = 0.1 / x'b.
        let data = dataset(vec![vec![1.0, 0.0, 0.0]], vec![0.0, 0.0, 0.0]);
        let q = vec![0.0; 3];
        let b = vec![1.0, 0.0, 0.0];
        let cfg = TauPathConfig::new(0.1, 1, 0.0, 1.0);
        let path = tau_path(&data, &q, &b, &cfg).unwrap();
        assert_eq!(path.kinks.len(), 1);
        assert_relative_eq!(path.kinks[0].param, 0.1, max_relative = 1e-12);
        assert_eq!(path.kinks[0].event, PathEvent::Include);
        assert_eq!(path.segments.len(), 2);
        assert!(path.segments[0].patterns.is_empty());
        assert_eq!(path.segments[1].patterns, vec![Pattern::singleton(1)]);
        assert_relative_eq!(path.segments[1].nu[0], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn constant_line_has_one_segment() {
        let data = fixture(1, 20, 5, 0.6);
        let q = data.y().to_vec();
        let b = vec![0.0; data.n()];
        let (lmax, _, _) = lasso::lambda_max(&data, &q, 2).unwrap();
        let cfg = TauPathConfig::new(0.5 * lmax, 2, -1.0, 1.0);
        let path = tau_path(&data, &q, &b, &cfg).unwrap();
        assert!(path.kinks.is_empty());
        assert_eq!(path.segments.len(), 1);
        assert!(!path.segments[0].patterns.is_empty());
    }

    #[test]
    fn agrees_with_dense_reference() {
        for seed in 0..6 {
            let data = fixture(seed + 40, 24, 6, 0.55);
            let y = data.y().to_vec();
            let (lmax, _, _) = lasso::lambda_max(&data, &y, 3).unwrap();
            let lambda = 0.4 * lmax;
            // Condition on the least-squares direction of the first base
            // pattern within the selected set of a preliminary fit.
            let b: Vec<f64> = {
                let mean = y.iter().sum::<f64>() / y.len() as f64;
                y.iter().map(|v| (v - mean) / y.len() as f64).collect()
            };
            let q: Vec<f64> = y.iter().zip(&b).map(|(yi, bi)| yi - 3.0 * bi).collect();
            let cfg = TauPathConfig::new(lambda, 3, 0.0, 6.0);
            let fast = tau_path(&data, &q, &b, &cfg).unwrap();
            let design = oracle::dense_expand(&data, 3, None).unwrap();
            let dense =
                oracle::dense_tau_path(&design, &q, &b, lambda, 0.0, 6.0, cfg.k_max).unwrap();
            assert_eq!(fast.kinks.len(), dense.kinks.len(), "seed {seed}");
            for (a, bk) in fast.kinks.iter().zip(&dense.kinks) {
                assert_relative_eq!(a.param, bk.param, max_relative = 1e-9, epsilon = 1e-12);
                assert_eq!(a.event, bk.event);
                assert_eq!(a.pattern, bk.pattern);
            }
            assert_eq!(fast.segments.len(), dense.segments.len());
            for (a, bseg) in fast.segments.iter().zip(&dense.segments) {
                let mut lhs = a.patterns.clone();
                lhs.sort();
                let mut rhs = bseg.patterns.clone();
                rhs.sort();
                assert_eq!(lhs, rhs, "seed {seed}");
            }
        }
    }

    #[test]
    fn pruned_matches_unpruned() {
        for seed in 0..6 {
            let data = fixture(seed + 80, 22, 6, 0.5);
            let y = data.y().to_vec();
            let (lmax, _, _) = lasso::lambda_max(&data, &y, 3).unwrap();
            let b: Vec<f64> = (0..data.n())
                .map(|i| if i % 3 == 0 { 0.05 } else { -0.02 })
                .collect();
            let cfg = TauPathConfig::new(0.35 * lmax, 3, -2.0, 2.0);
            let q: Vec<f64> = y.iter().zip(&b).map(|(yi, bi)| yi - 0.5 * bi).collect();
            let fast = tau_path(&data, &q, &b, &cfg).unwrap();
            let slow = oracle::unpruned_tau_path(&data, &q, &b, &cfg).unwrap();
            assert_eq!(fast.kinks.len(), slow.kinks.len(), "seed {seed}");
            for (a, bk) in fast.kinks.iter().zip(&slow.kinks) {
                assert_relative_eq!(a.param, bk.param, max_relative = 1e-9, epsilon = 1e-12);
                assert_eq!(a.pattern, bk.pattern);
            }
            assert!(fast.nodes_total <= slow.nodes_total);
        }
    }

    #[test]
    fn segments_tile_the_range() {
        let data = fixture(9, 26, 6, 0.5);
        let y = data.y().to_vec();
        let (lmax, _, _) = lasso::lambda_max(&data, &y, 2).unwrap();
        let b: Vec<f64> = (0..data.n()).map(|i| ((i % 5) as f64 - 2.0) / 40.0).collect();
        let q = y.clone();
        let cfg = TauPathConfig::new(0.3 * lmax, 2, -4.0, 4.0);
        let path = tau_path(&data, &q, &b, &cfg).unwrap();
        assert_relative_eq!(path.segments.first().unwrap().lo, -4.0);
        assert_relative_eq!(path.segments.last().unwrap().hi, 4.0);
        for pair in path.segments.windows(2) {
            assert_relative_eq!(pair[0].hi, pair[1].lo);
            assert!(pair[0].hi > pair[0].lo);
        }
        assert_eq!(path.segments.len(), path.kinks.len() + 1);
    }
}
