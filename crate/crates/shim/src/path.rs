//! Types shared by the two solution paths, and the kink bookkeeping both
//! loops rely on: deletion scans, tie policy, and duplicate-column aliasing.
//!
//! Tie policy, used identically by every path and by the dense reference
//! implementations: candidate steps within `TIE_REL` times the path's scale
//! of one another count as tied; deletions win ties against inclusions, and
//! among tied patterns the lexicographically smallest wins.

use serde::Serialize;

use crate::pattern::Pattern;

/// Relative tolerance for tied or vanishing steps: two candidate steps
/// within `TIE_REL * scale` are indistinguishable (the scale is
/// `lambda_max` on regularisation paths and the parameter range on
/// response paths).
pub const TIE_REL: f64 = 1e-12;

/// What happened at a kink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathEvent {
    Include,
    Delete,
}

/// One kink of a piecewise-linear solution path.
#[derive(Debug, Clone, Serialize)]
pub struct Breakpoint {
    /// Parameter value at the kink (`lambda` or `tau`).
    pub param: f64,
    pub event: PathEvent,
    /// Pattern entering or leaving the active set.
    pub pattern: Pattern,
    /// Active patterns immediately after the event, in model order.
    pub active_after: Vec<Pattern>,
    /// Equicorrelation signs immediately after the event.
    pub signs_after: Vec<f64>,
    /// Coefficients immediately after the event (same order).
    pub beta_after: Vec<f64>,
}

/// `(x)_{++}`: positive values pass through, everything else (including
/// zero, negatives, and NaN from 0/0) becomes "never".
#[inline]
pub(crate) fn pos_step(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        f64::INFINITY
    }
}

/// Step at which an inactive pattern reaches its inclusion boundary, from
/// the signed `gap` to that boundary and the `closing` rate (gap lost per
/// unit of path parameter).  A positive closing gap crosses in the future.
/// A zero or negative gap that is still closing sits on (or a hair beyond)
/// the boundary — typically a pattern parked there by an earlier tie or
/// stop whose direction just turned outward — and must enter as soon as its
/// violation would exceed the tie band, i.e. after `(gap + band) / closing`.
/// The band keeps a pattern that merely *rides* the boundary (an exact
/// linear combination of the active columns, whose closing rate is pure
/// cancellation noise) from being pulled in: its entry time `band / noise`
/// lies far beyond any horizon, while a genuine outward turn fires within
/// a band-sized step.  A gap that is not closing never crosses.
/// Columns judged linearly dependent on the active set below this relative
/// projection residual.  A dependent inactive column rides its boundary with
/// a pinned correlation, so its crossing "events" are quotients of roundoff
/// noise; it must be excluded from selection until a deletion breaks the
/// dependence.  Genuine residuals sit many orders of magnitude above this.
pub(crate) const SPAN_RTOL: f64 = 1e-8;

#[inline]
pub(crate) fn boundary_step(gap: f64, closing: f64, band: f64) -> f64 {
    if closing > 0.0 && !gap.is_nan() {
        if gap > 0.0 {
            gap / closing
        } else {
            ((gap + band) / closing).max(0.0)
        }
    } else {
        f64::INFINITY
    }
}

/// Smallest positive deletion step `(-beta_j / nu_j)_{++}` over the active
/// set, skipping `skip_idx` (a pattern may not be deleted at the very kink
/// that included it).  Ties within `tie_tol` resolve to the
/// lexicographically smallest pattern.
pub(crate) fn deletion_step(
    beta: &[f64],
    nu: &[f64],
    patterns: &[Pattern],
    skip_idx: Option<usize>,
    tie_tol: f64,
) -> (f64, Option<usize>) {
    let mut min = f64::INFINITY;
    for (j, (&b, &v)) in beta.iter().zip(nu).enumerate() {
        if Some(j) == skip_idx {
            continue;
        }
        let step = pos_step(-b / v);
        if step < min {
            min = step;
        }
    }
    if !min.is_finite() {
        return (f64::INFINITY, None);
    }
    let mut best: Option<usize> = None;
    for (j, (&b, &v)) in beta.iter().zip(nu).enumerate() {
        if Some(j) == skip_idx {
            continue;
        }
        if pos_step(-b / v) <= min + tie_tol {
            best = match best {
                Some(i) if patterns[i] <= patterns[j] => Some(i),
                _ => Some(j),
            };
        }
    }
    (min, best)
}

/// Records `(duplicate, active)` pattern pairs discovered during inclusion
/// searches.  With no ridge term, a candidate whose feature column is
/// elementwise within `COL_EQ_TOL` of an already-active column would make the
/// Gram matrix singular; such candidates are excluded from inclusion and
/// reported as aliases of the active pattern instead.
#[derive(Debug, Default, Clone)]
pub struct AliasLog {
    seen: std::collections::BTreeSet<(Pattern, Pattern)>,
}

/// Elementwise tolerance for treating two feature columns as identical.
pub const COL_EQ_TOL: f64 = 1e-12;

impl AliasLog {
    pub fn record(&mut self, duplicate: Pattern, active: Pattern) {
        self.seen.insert((duplicate, active));
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    /// Sorted `(duplicate, active)` pairs.
    pub fn pairs(&self) -> Vec<(Pattern, Pattern)> {
        self.seen.iter().cloned().collect()
    }
}

/// True when two columns agree elementwise within [`COL_EQ_TOL`].
pub(crate) fn columns_equal(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= COL_EQ_TOL)
}
