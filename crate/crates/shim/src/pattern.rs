//! Interaction patterns and implicit search over the pattern tree.
//!
//! A pattern is a non-empty, strictly increasing list of 1-based column
//! indices; its feature column is the elementwise product of those columns.
//! Patterns form a tree in which a node's children append one index larger
//! than the node's maximum, so every pattern of order at most `d` appears
//! exactly once and a depth-first walk visits patterns in lexicographic
//! order.
//!
//! Because every design entry lies in [0, 1], a child's feature column is
//! elementwise no larger than its parent's.  That anti-monotonicity yields
//! cheap per-node bounds on |x'w| for every descendant x of the current node
//! (split the reference vector w by sign and bound each half separately),
//! which is what lets the searches below discard whole subtrees while still
//! returning exactly the same answer as exhaustive enumeration.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::data::Dataset;
use crate::error::Error;
use crate::Result;

/// A feature interaction: a strictly increasing set of 1-based column indices.
///
/// The derived ordering is lexicographic on the index list, which is also the
/// order in which tree walks visit patterns; all tie-breaking in the crate
/// resolves to "lexicographically smallest pattern".
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pattern(Vec<u32>);

impl Pattern {
    /// Validates that `indices` is non-empty, strictly increasing, and 1-based.
    pub fn new(indices: Vec<u32>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Input("a pattern needs at least one index".into()));
        }
        if indices[0] == 0 {
            return Err(Error::Input("pattern indices are 1-based".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input(format!(
                "pattern indices must be strictly increasing, got {indices:?}"
            )));
        }
        Ok(Pattern(indices))
    }

    /// A single-column pattern.
    pub fn singleton(j: u32) -> Self {
        Pattern(vec![j])
    }

    pub(crate) fn from_slice(indices: &[u32]) -> Self {
        Pattern(indices.to_vec())
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    /// Interaction order (number of participating columns).
    pub fn order(&self) -> usize {
        self.0.len()
    }

    pub fn max_index(&self) -> u32 {
        *self.0.last().expect("patterns are non-empty")
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for j in &self.0 {
            if !first {
                write!(f, "*")?;
            }
            write!(f, "{j}")?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for Pattern {
    type Err = Error;

    /// Parses `"2*5*7"` (also accepting `x`, whitespace, or `,` separators).
    fn from_str(s: &str) -> Result<Self> {
        let mut indices = Vec::new();
        for part in s.split(|c: char| c == '*' || c == 'x' || c == ',' || c.is_whitespace()) {
            if part.is_empty() {
                continue;
            }
            let j: u32 = part
                .parse()
                .map_err(|_| Error::Input(format!("bad pattern index '{part}' in '{s}'")))?;
            indices.push(j);
        }
        indices.sort_unstable();
        indices.dedup();
        Pattern::new(indices)
    }
}

/// The feature column of `pattern`: the elementwise product of its base
/// columns.
pub fn feature_column(data: &Dataset, pattern: &Pattern) -> Vec<f64> {
    let mut col = vec![1.0; data.n()];
    for &j in pattern.indices() {
        for (c, z) in col.iter_mut().zip(data.col(j)) {
            *c *= z;
        }
    }
    col
}

/// The children of `pattern` in the canonical tree: every extension by one
/// index strictly larger than the pattern's maximum, up to `m`.
pub fn children(pattern: &Pattern, m: u32) -> Vec<Pattern> {
    (pattern.max_index() + 1..=m)
        .map(|j| {
            let mut idx = pattern.indices().to_vec();
            idx.push(j);
            Pattern(idx)
        })
        .collect()
}

/// Number of patterns over `m` columns with order at most `d`, i.e.
/// `sum_{k=1..d} C(m, k)`; `None` on u128 overflow.
pub fn pattern_count(m: u32, d: u32) -> Option<u128> {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for k in 1..=d.min(m) {
        // C(m, k) = C(m, k-1) * (m - k + 1) / k, always exact.
        binom = binom
            .checked_mul((m - k + 1) as u128)?
            .checked_div(k as u128)?;
        total = total.checked_add(binom)?;
    }
    Some(total)
}

/// Upper bound on |x'w| valid for `col` and every elementwise-smaller,
/// non-negative column (in particular all tree descendants of `col`):
/// the larger of the positive-part and negative-part mass of `w` weighted
/// by `col`.
pub fn bound_abs_dot(col: &[f64], w: &[f64]) -> f64 {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for (&x, &wi) in col.iter().zip(w) {
        if wi > 0.0 {
            pos += wi * x;
        } else {
            neg -= wi * x;
        }
    }
    pos.max(neg)
}

/// Subtree bounds for the three reference vectors a path search consults:
/// the residual `w`, the equiangular image `v`, and the response direction
/// `b` (absent on the regularisation path).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTriple {
    pub w: f64,
    pub v: f64,
    pub theta: f64,
}

/// Computes [`BoundTriple`] for one column.  `v` and `b` may be absent
/// (empty active set, or a path with no response direction); their bounds
/// are then zero.
pub fn bound_triple(col: &[f64], w: &[f64], v: Option<&[f64]>, b: Option<&[f64]>) -> BoundTriple {
    BoundTriple {
        w: bound_abs_dot(col, w),
        v: v.map_or(0.0, |v| bound_abs_dot(col, v)),
        theta: b.map_or(0.0, |b| bound_abs_dot(col, b)),
    }
}

/// Inner products of one tree node's column with the search's reference
/// vectors.
#[derive(Debug, Clone, Copy)]
pub struct NodeStats {
    /// x'w — correlation with the current residual.
    pub rho: f64,
    /// x'v — correlation with the image of the equiangular direction.
    pub eta: f64,
    /// x'b — correlation with the response direction (0 on the lambda path).
    pub theta: f64,
}

/// Reference vectors and traversal options shared by the tree searches.
pub struct SearchContext<'a> {
    pub data: &'a Dataset,
    /// Maximum interaction order.
    pub d: u32,
    /// Current residual.
    pub w: &'a [f64],
    /// Image of the equiangular direction (`None` when the active set is
    /// empty, meaning v = 0).
    pub v: Option<&'a [f64]>,
    /// Response direction for tau paths (`None` on lambda paths).
    pub b: Option<&'a [f64]>,
    /// When false, the walk enumerates the full tree (oracle mode).
    pub prune: bool,
}

/// Result of a minimum-step search over inclusion candidates.
#[derive(Debug, Clone)]
pub struct MinStepOutcome {
    /// Smallest candidate step; `f64::INFINITY` if no candidate exists.
    pub delta: f64,
    /// Pattern attaining it (lexicographically smallest on ties).
    pub pattern: Option<Pattern>,
    /// Sign the winning pattern would enter with.
    pub sign: f64,
    /// Tree nodes whose statistics were evaluated.
    pub nodes: u64,
}

/// Exact branch-and-bound minimisation of a per-node step over the pattern
/// tree.
///
/// Every node (not only leaves) is a candidate unless `skip` claims it.
/// `step_rule` maps a node (its index slice) and its [`NodeStats`] to a
/// candidate step and entry sign (infinite when the node can never produce
/// the next event); it sees the pattern so that callers can veto specific
/// nodes conditionally on the computed step.
/// `prune_rhs` maps the running minimum `delta*` to a threshold: a subtree is
/// discarded when `b_w + delta* * (b_theta + b_v) < prune_rhs(delta*)`, which
/// certifies every descendant's step exceeds `delta*`.  `seed_cut` pre-seeds
/// the running minimum with steps already known from other event types
/// (deletions, distance to the path end), which sharpens pruning without
/// affecting which candidate wins.
///
/// Ties within `tie_tol` resolve to the first (lexicographically smallest)
/// pattern while the running minimum still tightens to the smaller value.
pub fn min_step_search(
    ctx: &SearchContext,
    seed_cut: f64,
    tie_tol: f64,
    mut skip: impl FnMut(&[u32], &[f64]) -> bool,
    step_rule: impl Fn(&[u32], &NodeStats) -> (f64, f64),
    prune_rhs: impl Fn(f64) -> f64,
) -> MinStepOutcome {
    struct Best {
        delta: f64,
        pattern: Option<Pattern>,
        sign: f64,
    }
    let mut best = Best {
        delta: f64::INFINITY,
        pattern: None,
        sign: 0.0,
    };
    let mut cut = seed_cut;
    let mut nodes: u64 = 0;

    let mut visit = |pat: &[u32], col: &[f64]| -> bool {
        nodes += 1;
        if !skip(pat, col) {
            let stats = NodeStats {
                rho: crate::vecops::dot(col, ctx.w),
                eta: ctx.v.map_or(0.0, |v| crate::vecops::dot(col, v)),
                theta: ctx.b.map_or(0.0, |b| crate::vecops::dot(col, b)),
            };
            let (delta, sign) = step_rule(pat, &stats);
            if delta < cut {
                cut = delta;
            }
            if delta < best.delta - tie_tol {
                best = Best {
                    delta,
                    pattern: Some(Pattern::from_slice(pat)),
                    sign,
                };
            } else if delta < best.delta {
                // Tie: keep the earlier (lexicographically smaller) pattern
                // but remember the tighter value.
                best.delta = delta;
            }
        }
        // Decide whether the subtree can still contain a step <= cut.
        if pat.len() >= ctx.d as usize {
            return false;
        }
        if ctx.prune && cut.is_finite() {
            let bounds = bound_triple(col, ctx.w, ctx.v, ctx.b);
            let reach = bounds.w + cut * (bounds.theta + bounds.v);
            if reach < prune_rhs(cut) {
                return false;
            }
        }
        true
    };
    walk(ctx.data, ctx.d, &mut visit);

    MinStepOutcome {
        delta: best.delta,
        pattern: best.pattern,
        sign: best.sign,
        nodes,
    }
}

/// Result of a maximum absolute correlation search.
#[derive(Debug, Clone)]
pub struct MaxAbsOutcome {
    /// max |x'w| over non-skipped patterns (0 when everything was skipped).
    pub value: f64,
    pub pattern: Option<Pattern>,
    pub nodes: u64,
}

/// Exact branch-and-bound maximisation of |x'w| over the pattern tree,
/// used for `lambda_max` and for certifying inactive optimality conditions.
/// Subtrees are discarded once their bound cannot exceed the best value seen,
/// so exact ties resolve to the lexicographically smallest pattern.
pub fn max_abs_search(
    data: &Dataset,
    d: u32,
    w: &[f64],
    prune: bool,
    mut skip: impl FnMut(&[u32], &[f64]) -> bool,
) -> MaxAbsOutcome {
    let mut best_value = 0.0_f64;
    let mut best_pattern: Option<Pattern> = None;
    let mut nodes: u64 = 0;

    let mut visit = |pat: &[u32], col: &[f64]| -> bool {
        nodes += 1;
        if !skip(pat, col) {
            let c = crate::vecops::dot(col, w).abs();
            if c > best_value {
                best_value = c;
                best_pattern = Some(Pattern::from_slice(pat));
            }
        }
        if pat.len() >= d as usize {
            return false;
        }
        if prune {
            bound_abs_dot(col, w) > best_value
        } else {
            true
        }
    };
    walk(data, d, &mut visit);

    MaxAbsOutcome {
        value: best_value,
        pattern: best_pattern,
        nodes,
    }
}

/// Depth-first walk of the pattern tree in lexicographic order.
///
/// `visit` receives each pattern (as its index slice) together with its
/// feature column and returns whether to descend into the pattern's children.
/// Columns are built incrementally along the spine of the walk, so each node
/// costs one elementwise product regardless of depth.
pub fn walk(data: &Dataset, d: u32, visit: &mut impl FnMut(&[u32], &[f64]) -> bool) {
    if d == 0 {
        return;
    }
    let n = data.n();
    let mut spine: Vec<Vec<f64>> = (0..d as usize).map(|_| vec![0.0; n]).collect();
    let mut pat: Vec<u32> = Vec::with_capacity(d as usize);
    walk_rec(data, d, &mut spine, &mut pat, 1, visit);
}

fn walk_rec(
    data: &Dataset,
    d: u32,
    spine: &mut [Vec<f64>],
    pat: &mut Vec<u32>,
    lo: u32,
    visit: &mut impl FnMut(&[u32], &[f64]) -> bool,
) {
    let depth = pat.len();
    for j in lo..=data.m() {
        // Build this child's column from the parent's (ones at the root).
        let (parents, rest) = spine.split_at_mut(depth);
        let col = &mut rest[0];
        let zj = data.col(j);
        match parents.last() {
            Some(parent) => {
                for i in 0..col.len() {
                    col[i] = parent[i] * zj[i];
                }
            }
            None => col.copy_from_slice(zj),
        }
        pat.push(j);
        let descend = visit(pat, &spine[depth]);
        if descend && pat.len() < d as usize {
            walk_rec(data, d, spine, pat, j + 1, visit);
        }
        pat.pop();
    }
}
