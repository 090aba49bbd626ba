//! The regularisation path over the implicit pattern tree.
//!
//! Starting from `lambda_max = max |x'y|` (found by a pruned tree search),
//! the active set, signs, and coefficients evolve piecewise-linearly as
//! `lambda` decreases.  At every kink the next event is either the inclusion
//! of the inactive pattern whose correlation first reaches the shrinking
//! boundary, or the deletion of an active pattern whose coefficient first
//! hits zero.  Inclusion candidates are found with a branch-and-bound search:
//! a subtree is discarded once its correlation bounds show that no descendant
//! can reach the boundary before the best event found so far, which is exact
//! — pruned and exhaustive searches return the same kinks.
//!
//! A ridge term turns the same loop into an elastic-net path: the Gram matrix
//! gains `ridge` on its diagonal and active-pattern statistics gain the
//! matching correction, exactly as if the design had been augmented with
//! `sqrt(ridge)` identity rows (see [`crate::elnet`]).

use std::collections::HashSet;

use crate::active::ActiveModel;
use crate::data::Dataset;
use crate::error::Error;
use crate::path::{
    boundary_step, columns_equal, deletion_step, AliasLog, Breakpoint, PathEvent, SPAN_RTOL,
    TIE_REL,
};
use crate::pattern::{
    feature_column, max_abs_search, min_step_search, Pattern, SearchContext,
};
use crate::vecops::dot;
use crate::Result;

/// Options for [`lambda_path`].
#[derive(Debug, Clone)]
pub struct LambdaPathConfig {
    /// Maximum interaction order.
    pub d: u32,
    /// Where the path stops; `None` means `0.01 * lambda_max`.
    pub lambda_target: Option<f64>,
    /// Elastic-net ridge weight (0 for the plain lasso).
    pub ridge: f64,
    /// Hard cap on the active set size; exceeding it is a refusal, not a
    /// stopping rule.
    pub k_max: usize,
    /// Disable to enumerate the full tree at every step (reference mode).
    pub prune: bool,
    /// Safety valve against stalled paths.
    pub max_kinks: usize,
}

impl Default for LambdaPathConfig {
    fn default() -> Self {
        LambdaPathConfig {
            d: 3,
            lambda_target: None,
            ridge: 0.0,
            k_max: 100,
            prune: true,
            max_kinks: 10_000,
        }
    }
}

/// A computed regularisation path.
#[derive(Debug, Clone)]
pub struct LambdaPath {
    pub lambda_max: f64,
    pub lambda_target: f64,
    /// Pattern achieving `lambda_max` (the first inclusion).
    pub first_pattern: Pattern,
    /// Kinks strictly inside `(lambda_target, lambda_max)`, in path order
    /// (decreasing lambda).
    pub breakpoints: Vec<Breakpoint>,
    /// Model state at `lambda_target`.
    pub model: ActiveModel,
    /// Tree nodes evaluated by each kink's step search.
    pub nodes_per_step: Vec<u64>,
    /// Total nodes including the `lambda_max` sweep.
    pub nodes_total: u64,
    /// `(duplicate, active)` pattern pairs excluded from inclusion.
    pub aliases: Vec<(Pattern, Pattern)>,
}

/// `max |x'y|` over all patterns of order at most `d`, with its argmax
/// (lexicographically smallest on exact ties) and the number of tree nodes
/// the pruned search evaluated.
pub fn lambda_max(data: &Dataset, y: &[f64], d: u32) -> Result<(f64, Pattern, u64)> {
    if d == 0 {
        return Err(Error::Input("interaction order must be at least 1".into()));
    }
    if y.len() != data.n() {
        return Err(Error::Input(format!(
            "response has {} entries, design has {} rows",
            y.len(),
            data.n()
        )));
    }
    let out = max_abs_search(data, d, y, true, |_, _| false);
    match out.pattern {
        Some(p) if out.value > 0.0 => Ok((out.value, p, out.nodes)),
        _ => Err(Error::Input(
            "empty model: every pattern is uncorrelated with the response".into(),
        )),
    }
}

/// The next event the path would take from the model's current state.
#[derive(Debug, Clone)]
pub struct StepPlan {
    /// Parameter distance to the event (infinite when no event remains).
    pub delta: f64,
    pub event: Option<PlannedEvent>,
    /// Tree nodes evaluated by the inclusion search.
    pub nodes: u64,
}

/// An event a step search settled on.
#[derive(Debug, Clone)]
pub enum PlannedEvent {
    Include { pattern: Pattern, sign: f64 },
    Delete { index: usize },
}

/// Computes the next kink of the regularisation path from a refit model
/// state, without executing it.  Exposed for step-level verification; the
/// path loop uses the same internals.
pub fn lambda_step(
    data: &Dataset,
    y: &[f64],
    model: &mut ActiveModel,
    d: u32,
    prune: bool,
) -> Result<StepPlan> {
    model.refit(y)?;
    let tie_tol = TIE_REL * model.lambda().max(1.0);
    let mut aliases = AliasLog::default();
    Ok(plan_lambda_step(
        data,
        y,
        model,
        d,
        prune,
        tie_tol,
        f64::INFINITY,
        None,
        &[],
        &mut aliases,
    ))
}

/// Shared step planner; `model` must be refit at its current lambda.
#[allow(clippy::too_many_arguments)]
fn plan_lambda_step(
    data: &Dataset,
    y: &[f64],
    model: &ActiveModel,
    d: u32,
    prune: bool,
    tie_tol: f64,
    seed_remaining: f64,
    just_included: Option<usize>,
    blocked: &[Pattern],
    aliases: &mut AliasLog,
) -> StepPlan {
    let lambda = model.lambda();
    let ridge = model.ridge();
    let nu = model.lambda_direction();
    let w = model.residual(y);
    let v = model.image(&nu);

    let (d_del, del_idx) = deletion_step(model.beta(), &nu, model.patterns(), just_included, tie_tol);

    // Active-pattern statistics for the prune threshold: on the augmented
    // design every active pattern sits exactly on the boundary, so
    // |x_k'w - ridge beta_k| = lambda and |x_k'v + ridge nu_k| = 1; computing
    // them from the actual state keeps the threshold honest under roundoff.
    let active_stats: Vec<(f64, f64)> = (0..model.len())
        .map(|k| {
            let col = model.column(k);
            let a = (dot(col, &w) - ridge * model.beta()[k]).abs();
            let c = (dot(col, &v) + ridge * nu[k]).abs();
            (a, c)
        })
        .collect();
    let prune_rhs = move |cut: f64| {
        active_stats
            .iter()
            .map(|&(a, c)| a - cut * c)
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let active: HashSet<&[u32]> = model
        .patterns()
        .iter()
        .map(|p| p.indices())
        .collect();
    // Duplicates of active columns are excluded at any ridge: their boundary
    // correlation is pinned at `lambda` (plus `ridge * |beta|`) up to
    // roundoff, so treating the crossing as an event would flip on ulps.
    // The first-included duplicate stays; the dense reference applies the
    // same rule on observation rows.
    let skip = |pat: &[u32], col: &[f64]| -> bool {
        if active.contains(pat) {
            return true;
        }
        if blocked.iter().any(|b| b.indices() == pat) {
            return true;
        }
        for k in 0..model.len() {
            if columns_equal(model.column(k), col) {
                aliases.record(
                    Pattern::from_slice(pat),
                    model.patterns()[k].clone(),
                );
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
        b: None,
        prune,
    };
    let step_rule = |_pat: &[u32], stats: &crate::pattern::NodeStats| -> (f64, f64) {
        let plus = boundary_step(lambda - stats.rho, 1.0 - stats.eta, tie_tol);
        let minus = boundary_step(lambda + stats.rho, 1.0 + stats.eta, tie_tol);
        // A just-deleted pattern sits exactly on the boundary; the band inside
        // `boundary_step` keeps its roundoff-level drift from re-entering,
        // while a genuine outward turn re-enters after a band-sized step.
        if plus <= minus {
            (plus, 1.0)
        } else {
            (minus, -1.0)
        }
    };
    let seed = d_del.min(seed_remaining);
    let inc = min_step_search(&ctx, seed, tie_tol, skip, step_rule, prune_rhs);

    let deletion_wins = d_del <= inc.delta + tie_tol;
    if deletion_wins && d_del.is_finite() {
        StepPlan {
            delta: d_del,
            event: Some(PlannedEvent::Delete {
                index: del_idx.expect("finite deletion step has an index"),
            }),
            nodes: inc.nodes,
        }
    } else if inc.delta.is_finite() {
        StepPlan {
            delta: inc.delta,
            event: Some(PlannedEvent::Include {
                pattern: inc.pattern.expect("finite inclusion step has a pattern"),
                sign: inc.sign,
            }),
            nodes: inc.nodes,
        }
    } else {
        StepPlan {
            delta: f64::INFINITY,
            event: None,
            nodes: inc.nodes,
        }
    }
}

/// Computes the regularisation path of the (optionally ridge-regularised)
/// lasso over all interaction patterns of order at most `cfg.d`, from
/// `lambda_max` down to the target.
///
/// `y` is the response to trace (usually `data.y()`, but tau-path
/// initialisation traces shifted responses against the same design).
pub fn lambda_path(data: &Dataset, y: &[f64], cfg: &LambdaPathConfig) -> Result<LambdaPath> {
    if !(cfg.ridge >= 0.0 && cfg.ridge.is_finite()) {
        return Err(Error::Input(format!(
            "ridge weight must be finite and non-negative, got {}",
            cfg.ridge
        )));
    }
    if cfg.k_max == 0 {
        return Err(Error::Input("k_max must be at least 1".into()));
    }
    let (lmax, first, sweep_nodes) = lambda_max(data, y, cfg.d)?;
    let target = cfg.lambda_target.unwrap_or(0.01 * lmax);
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::Input(format!(
            "lambda target must be positive and finite, got {target}"
        )));
    }

    let mut model = ActiveModel::new(lmax, cfg.ridge);
    if target > lmax {
        // Nothing is active anywhere on [target, infinity).
        model.set_lambda(target);
        return Ok(LambdaPath {
            lambda_max: lmax,
            lambda_target: target,
            first_pattern: first,
            breakpoints: Vec::new(),
            model,
            nodes_per_step: Vec::new(),
            nodes_total: sweep_nodes,
            aliases: Vec::new(),
        });
    }

    let tie_tol = TIE_REL * lmax;
    let first_col = feature_column(data, &first);
    let first_sign = dot(&first_col, y).signum();
    model.include(first.clone(), first_col, first_sign);
    model.refit(y)?;

    let mut breakpoints: Vec<Breakpoint> = Vec::new();
    let mut nodes_per_step: Vec<u64> = Vec::new();
    let mut nodes_total = sweep_nodes;
    let mut aliases = AliasLog::default();
    let mut just_included: Option<usize> = Some(0);
    // Patterns found linearly dependent on the active set; excluded from
    // selection until a deletion shrinks the span and may break the
    // dependence.  Inclusions only grow the span, so blocks persist.
    let mut span_blocked: Vec<Pattern> = Vec::new();

    loop {
        if breakpoints.len() >= cfg.max_kinks {
            return Err(Error::Numerical(format!(
                "lambda path exceeded {} kinks at lambda = {}",
                cfg.max_kinks,
                model.lambda()
            )));
        }
        let remaining = model.lambda() - target;
        let plan = plan_lambda_step(
            data,
            y,
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
            break;
        }
        // A column inside the active span rides the boundary with a pinned
        // correlation, so any crossing it appears to win is a quotient of
        // roundoff noise and including it would make the Gram singular.
        // Reject it before moving lambda and replan from the same state.
        if model.ridge() == 0.0 && !model.is_empty() {
            if let Some(PlannedEvent::Include { ref pattern, .. }) = plan.event {
                let col = feature_column(data, pattern);
                if model.span_residual(&col) <= SPAN_RTOL {
                    span_blocked.push(pattern.clone());
                    continue;
                }
            }
        }
        let lambda_next = model.lambda() - plan.delta;
        model.set_lambda(lambda_next);
        just_included = None;
        match plan.event.expect("finite step always carries an event") {
            PlannedEvent::Delete { index } => {
                span_blocked.clear();
                let pattern = model.remove(index);
                model.refit(y)?;
                breakpoints.push(make_breakpoint(&model, lambda_next, PathEvent::Delete, &pattern));
                if model.is_empty() {
                    // Unreachable on an exact path (a lone coefficient only
                    // grows as lambda shrinks); restart from a fresh argmax
                    // for robustness.
                    let sweep = max_abs_search(data, cfg.d, y, cfg.prune, |pat, _| {
                        pattern.indices() == pat
                    });
                    nodes_total += sweep.nodes;
                    match sweep.pattern {
                        Some(p) if sweep.value > target => {
                            let col = feature_column(data, &p);
                            let sign = dot(&col, y).signum();
                            model.set_lambda(sweep.value);
                            model.include(p.clone(), col, sign);
                            model.refit(y)?;
                            breakpoints.push(make_breakpoint(
                                &model,
                                sweep.value,
                                PathEvent::Include,
                                &p,
                            ));
                            just_included = Some(model.len() - 1);
                        }
                        _ => break,
                    }
                }
            }
            PlannedEvent::Include { pattern, sign } => {
                if model.len() + 1 > cfg.k_max {
                    return Err(Error::CapExceeded(format!(
                        "active set would exceed k_max = {} at lambda = {lambda_next}",
                        cfg.k_max
                    )));
                }
                let col = feature_column(data, &pattern);
                model.include(pattern.clone(), col, sign);
                model.refit(y)?;
                breakpoints.push(make_breakpoint(&model, lambda_next, PathEvent::Include, &pattern));
                just_included = Some(model.len() - 1);
            }
        }
    }

    model.set_lambda(target);
    model.refit(y)?;
    Ok(LambdaPath {
        lambda_max: lmax,
        lambda_target: target,
        first_pattern: first,
        breakpoints,
        model,
        nodes_per_step,
        nodes_total,
        aliases: aliases.pairs(),
    })
}

fn make_breakpoint(
    model: &ActiveModel,
    param: f64,
    event: PathEvent,
    pattern: &Pattern,
) -> Breakpoint {
    Breakpoint {
        param,
        event,
        pattern: pattern.clone(),
        active_after: model.patterns().to_vec(),
        signs_after: model.signs().to_vec(),
        beta_after: model.beta().to_vec(),
    }
}
