//! Slow, independent reference implementations used to validate the fast
//! paths.
//!
//! Everything here works on an *explicitly expanded* design: all interaction
//! columns up to order `d` are materialised (behind a hard cap) and paths are
//! computed by exhaustive scans with plain dense linear algebra.  The code
//! deliberately shares no traversal, bounding, or solving machinery with the
//! implicit-tree engine — only the public event conventions (tie policy,
//! duplicate-column aliasing, kink bookkeeping) so that results are
//! comparable kink by kink.
//!
//! The elastic net oracles run the *lasso* reference on the augmented design
//! `[X; sqrt(ridge) I]` with a zero-padded response, which is the textbook
//! reduction of the elastic net to a lasso; agreement with the implicit
//! engine's ridge-corrected steps is a strong end-to-end check.

use std::collections::HashSet;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::data::Dataset;
use crate::error::Error;
use crate::lasso::{self, LambdaPathConfig};
use crate::path::{boundary_step, pos_step, Breakpoint, PathEvent, SPAN_RTOL, TIE_REL};
use crate::pattern::{pattern_count, Pattern};
use crate::tau::{self, TauPathConfig, TauPathResult};
use crate::vecops::dot;
use crate::Result;

/// Default cap on the number of explicitly materialised columns.
pub const DEFAULT_EXPANSION_CAP: usize = 50_000;

/// An explicitly expanded interaction design, columns in lexicographic
/// pattern order.
#[derive(Debug, Clone)]
pub struct DenseDesign {
    pub patterns: Vec<Pattern>,
    pub cols: Vec<Vec<f64>>,
    /// Total row count (augmented designs append ridge rows).
    pub n: usize,
    /// Observation rows only; column identity is judged on these, so the
    /// duplicate convention is the same with and without augmentation.
    pub data_rows: usize,
}

/// Materialises every pattern column up to order `d`, in lexicographic
/// order.  Refuses (rather than thrashes) when the expansion would exceed
/// `cap` columns (default [`DEFAULT_EXPANSION_CAP`]).
pub fn dense_expand(data: &Dataset, d: u32, cap: Option<usize>) -> Result<DenseDesign> {
    let cap = cap.unwrap_or(DEFAULT_EXPANSION_CAP);
    let count = pattern_count(data.m(), d);
    match count {
        Some(c) if c <= cap as u128 => {}
        _ => {
            return Err(Error::CapExceeded(format!(
                "expanding m={} to order {} needs {} columns, cap is {cap}",
                data.m(),
                d,
                count.map_or_else(|| "over 2^128".into(), |c| c.to_string()),
            )))
        }
    }
    let mut patterns = Vec::new();
    let mut cols = Vec::new();
    let mut idx: Vec<u32> = Vec::new();
    fn rec(
        data: &Dataset,
        d: u32,
        lo: u32,
        idx: &mut Vec<u32>,
        col: &[f64],
        patterns: &mut Vec<Pattern>,
        cols: &mut Vec<Vec<f64>>,
    ) {
        for j in lo..=data.m() {
            let child: Vec<f64> = col.iter().zip(data.col(j)).map(|(a, b)| a * b).collect();
            idx.push(j);
            patterns.push(Pattern::new(idx.clone()).expect("indices are increasing"));
            cols.push(child.clone());
            if (idx.len() as u32) < d {
                rec(data, d, j + 1, idx, &child, patterns, cols);
            }
            idx.pop();
        }
    }
    rec(
        data,
        d,
        1,
        &mut idx,
        &vec![1.0; data.n()],
        &mut patterns,
        &mut cols,
    );
    Ok(DenseDesign {
        patterns,
        cols,
        n: data.n(),
        data_rows: data.n(),
    })
}

/// Appends `sqrt(ridge) * e_j` rows to every column: the augmented design on
/// which a plain lasso reproduces the elastic net with ridge weight `ridge`.
pub fn augment(design: &DenseDesign, ridge: f64) -> DenseDesign {
    let p = design.cols.len();
    let r = ridge.sqrt();
    let cols = design
        .cols
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let mut col = Vec::with_capacity(design.n + p);
            col.extend_from_slice(c);
            col.extend((0..p).map(|i| if i == j { r } else { 0.0 }));
            col
        })
        .collect();
    DenseDesign {
        patterns: design.patterns.clone(),
        cols,
        n: design.n + p,
        data_rows: design.data_rows,
    }
}

/// Zero-pads a response vector to match an augmented design.
pub fn pad_response(y: &[f64], design: &DenseDesign) -> Vec<f64> {
    let mut out = y.to_vec();
    out.resize(design.n, 0.0);
    out
}

/// Final state of a dense reference path.
#[derive(Debug, Clone)]
pub struct DensePathResult {
    pub lambda_max: f64,
    pub lambda_target: f64,
    pub breakpoints: Vec<Breakpoint>,
    /// Final active patterns in model (inclusion) order with signs and
    /// coefficients at `lambda_target`.
    pub active: Vec<Pattern>,
    pub signs: Vec<f64>,
    pub beta: Vec<f64>,
}

struct DenseState<'a> {
    design: &'a DenseDesign,
    active: Vec<usize>,
    signs: Vec<f64>,
    beta: Vec<f64>,
}

impl<'a> DenseState<'a> {
    fn new(design: &'a DenseDesign) -> Self {
        DenseState {
            design,
            active: Vec::new(),
            signs: Vec::new(),
            beta: Vec::new(),
        }
    }

    fn col(&self, i: usize) -> &[f64] {
        &self.design.cols[self.active[i]]
    }

    fn gram(&self) -> Result<Cholesky<f64, nalgebra::Dyn>> {
        let k = self.active.len();
        let g = DMatrix::from_fn(k, k, |r, c| dot(self.col(r), self.col(c)));
        Cholesky::new(g).ok_or_else(|| Error::Degeneracy {
            pattern: self.patterns().last().expect("non-empty").to_string(),
        })
    }

    fn patterns(&self) -> Vec<Pattern> {
        self.active
            .iter()
            .map(|&j| self.design.patterns[j].clone())
            .collect()
    }

    /// beta and nu at the given lambda and response: stationarity plus the
    /// direction of motion (per unit lambda decrease or per unit tau
    /// increase, depending on `dir_rhs`).
    fn solve(
        &mut self,
        y: &[f64],
        lambda: f64,
        dir_rhs: DirRhs,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.active.is_empty() {
            self.beta.clear();
            return Ok((Vec::new(), Vec::new()));
        }
        let chol = self.gram()?;
        let k = self.active.len();
        let rhs = DVector::from_fn(k, |i, _| dot(self.col(i), y) - lambda * self.signs[i]);
        let beta = chol.solve(&rhs);
        let dir = match dir_rhs {
            DirRhs::Signs => DVector::from_fn(k, |i, _| self.signs[i]),
            DirRhs::Response(b) => DVector::from_fn(k, |i, _| dot(self.col(i), b)),
        };
        let nu = chol.solve(&dir);
        self.beta = beta.iter().copied().collect();
        Ok((self.beta.clone(), nu.iter().copied().collect()))
    }

    fn fitted_residual(&self, y: &[f64]) -> Vec<f64> {
        let mut w = y.to_vec();
        for (i, &b) in self.beta.iter().enumerate() {
            for (wi, xi) in w.iter_mut().zip(self.col(i)) {
                *wi -= b * xi;
            }
        }
        w
    }

    fn image(&self, coef: &[f64], n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for (i, &c) in coef.iter().enumerate() {
            for (vi, xi) in v.iter_mut().zip(self.col(i)) {
                *vi += c * xi;
            }
        }
        v
    }

    /// Smallest positive deletion step, lexicographically smallest pattern on
    /// ties, skipping the pattern included at this kink.
    fn deletion(&self, nu: &[f64], skip: Option<usize>, tie_tol: f64) -> (f64, Option<usize>) {
        let mut min = f64::INFINITY;
        for (j, (&b, &v)) in self.beta.iter().zip(nu).enumerate() {
            if Some(j) != skip {
                min = min.min(pos_step(-b / v));
            }
        }
        if !min.is_finite() {
            return (f64::INFINITY, None);
        }
        let mut best: Option<usize> = None;
        for (j, (&b, &v)) in self.beta.iter().zip(nu).enumerate() {
            if Some(j) == skip || pos_step(-b / v) > min + tie_tol {
                continue;
            }
            best = match best {
                Some(i)
                    if self.design.patterns[self.active[i]]
                        <= self.design.patterns[self.active[j]] =>
                {
                    Some(i)
                }
                _ => Some(j),
            };
        }
        (min, best)
    }

    /// True when column `j` duplicates an active column on the observation
    /// rows.  Augmented ridge rows are excluded on purpose: a duplicate's
    /// boundary correlation is pinned at `lambda` up to roundoff, so whether
    /// it "crosses" is a coin flip over ulps.  Excluding duplicates of
    /// active columns at any ridge makes the event deterministic and keeps
    /// the first-included duplicate, matching the tree engine.
    fn is_alias(&self, j: usize) -> bool {
        let rows = self.design.data_rows;
        let cj = &self.design.cols[j][..rows];
        self.active.iter().any(|&a| {
            self.design.cols[a][..rows]
                .iter()
                .zip(cj)
                .all(|(x, y)| (x - y).abs() <= crate::path::COL_EQ_TOL)
        })
    }

    /// Relative residual of column `j` projected onto the span of the active
    /// columns; near zero means linear dependence.  On an augmented design
    /// the ridge rows keep all columns independent by construction, so the
    /// test only ever fires on the plain lasso — matching the tree engine.
    fn span_residual(&self, j: usize) -> Result<f64> {
        if self.active.is_empty() {
            return Ok(1.0);
        }
        let chol = self.gram()?;
        let k = self.active.len();
        let target = &self.design.cols[j];
        let rhs = DVector::from_fn(k, |i, _| dot(self.col(i), target));
        let coef = chol.solve(&rhs);
        let mut res = target.clone();
        for (i, c) in coef.iter().enumerate() {
            for (ri, xi) in res.iter_mut().zip(self.col(i)) {
                *ri -= c * xi;
            }
        }
        let rn = dot(&res, &res).sqrt();
        let tn = dot(target, target).sqrt();
        Ok(if tn == 0.0 { 0.0 } else { rn / tn })
    }

    fn include(&mut self, j: usize, sign: f64) {
        self.active.push(j);
        self.signs.push(sign);
        self.beta.push(0.0);
    }

    fn delete(&mut self, i: usize) -> usize {
        self.signs.remove(i);
        self.beta.remove(i);
        self.active.remove(i)
    }

    fn breakpoint(&self, param: f64, event: PathEvent, pattern: Pattern) -> Breakpoint {
        Breakpoint {
            param,
            event,
            pattern,
            active_after: self.patterns(),
            signs_after: self.signs.clone(),
            beta_after: self.beta.clone(),
        }
    }
}

enum DirRhs<'a> {
    Signs,
    Response(&'a [f64]),
}

/// Exhaustive-scan lasso path on an explicit design, from `lambda_max` down
/// to `lambda_target` (default `0.01 * lambda_max`).
pub fn dense_lambda_path(
    design: &DenseDesign,
    y: &[f64],
    lambda_target: Option<f64>,
    k_max: usize,
) -> Result<DensePathResult> {
    let p = design.cols.len();
    let corr: Vec<f64> = design.cols.iter().map(|c| dot(c, y)).collect();
    let mut lambda_max = 0.0;
    let mut first = None;
    for (j, &c) in corr.iter().enumerate() {
        if c.abs() > lambda_max {
            lambda_max = c.abs();
            first = Some(j);
        }
    }
    if lambda_max <= 0.0 {
        return Err(Error::Input(
            "empty model: every column is uncorrelated with the response".into(),
        ));
    }
    let target = lambda_target.unwrap_or(0.01 * lambda_max);
    if !(target > 0.0) {
        return Err(Error::Input(format!(
            "lambda target must be positive, got {target}"
        )));
    }
    if target > lambda_max {
        return Ok(DensePathResult {
            lambda_max,
            lambda_target: target,
            breakpoints: Vec::new(),
            active: Vec::new(),
            signs: Vec::new(),
            beta: Vec::new(),
        });
    }
    let tie_tol = TIE_REL * lambda_max;
    let mut state = DenseState::new(design);
    let mut breakpoints = Vec::new();
    let first = first.expect("lambda_max > 0 implies an argmax");
    state.include(first, corr[first].signum());
    let mut lambda = lambda_max;
    let mut just_included: Option<usize> = Some(0);
    // Columns found linearly dependent on the active set; excluded until a
    // deletion shrinks the span (inclusions only grow it).
    let mut blocked: HashSet<usize> = HashSet::new();
    let mut completed = false;

    for _ in 0..50_000 {
        let (_, nu) = state.solve(y, lambda, DirRhs::Signs)?;
        let w = state.fitted_residual(y);
        let v = state.image(&nu, design.n);
        let remaining = lambda - target;

        let (d_del, del_idx) = state.deletion(&nu, just_included, tie_tol);

        // Exhaustive inclusion scan in lexicographic (storage) order.
        let mut d_inc = f64::INFINITY;
        let mut inc: Option<(usize, f64)> = None;
        for j in 0..p {
            if state.active.contains(&j) || state.is_alias(j) || blocked.contains(&j) {
                continue;
            }
            let rho = dot(&design.cols[j], &w);
            let eta = dot(&design.cols[j], &v);
            let plus = boundary_step(lambda - rho, 1.0 - eta, tie_tol);
            let minus = boundary_step(lambda + rho, 1.0 + eta, tie_tol);
            // A just-deleted variable sits exactly on the boundary; the band
            // inside `boundary_step` keeps its roundoff-level drift out while
            // a genuine outward turn re-enters after a band-sized step.
            let (delta, sign) = if plus <= minus { (plus, 1.0) } else { (minus, -1.0) };
            if delta < d_inc - tie_tol {
                d_inc = delta;
                inc = Some((j, sign));
            } else if delta < d_inc {
                d_inc = delta;
            }
        }

        let deletion_wins = d_del <= d_inc + tie_tol;
        let step = if deletion_wins { d_del } else { d_inc };
        if step >= remaining - tie_tol {
            completed = true;
            break;
        }
        if !deletion_wins {
            // A column inside the active span rides the boundary with a
            // pinned correlation; its apparent crossing is roundoff noise
            // and including it would make the Gram singular.  Reject it
            // before moving lambda and rescan from the same state.
            let (j, _) = inc.expect("finite inclusion step has a pattern");
            if state.span_residual(j)? <= SPAN_RTOL {
                blocked.insert(j);
                continue;
            }
        }
        lambda -= step;
        just_included = None;
        if deletion_wins {
            let i = del_idx.expect("finite deletion step has an index");
            blocked.clear();
            let j = state.delete(i);
            state.solve(y, lambda, DirRhs::Signs)?;
            breakpoints.push(state.breakpoint(
                lambda,
                PathEvent::Delete,
                design.patterns[j].clone(),
            ));
            if state.active.is_empty() {
                return Err(Error::Numerical(
                    "reference path emptied its active set".into(),
                ));
            }
        } else {
            let (j, sign) = inc.expect("finite inclusion step has a pattern");
            if state.active.len() + 1 > k_max {
                return Err(Error::CapExceeded(format!(
                    "active set would exceed k_max = {k_max}"
                )));
            }
            state.include(j, sign);
            just_included = Some(state.active.len() - 1);
            state.solve(y, lambda, DirRhs::Signs)?;
            breakpoints.push(state.breakpoint(
                lambda,
                PathEvent::Include,
                design.patterns[j].clone(),
            ));
        }
    }

    if !completed {
        return Err(Error::Numerical(
            "reference lambda path exceeded its kink budget".into(),
        ));
    }
    lambda = target;
    state.solve(y, lambda, DirRhs::Signs)?;
    Ok(DensePathResult {
        lambda_max,
        lambda_target: target,
        breakpoints,
        active: state.patterns(),
        signs: state.signs.clone(),
        beta: state.beta.clone(),
    })
}

/// One segment of a dense reference tau path.
#[derive(Debug, Clone)]
pub struct DenseSegment {
    pub lo: f64,
    pub hi: f64,
    pub patterns: Vec<Pattern>,
    pub signs: Vec<f64>,
}

/// Result of [`dense_tau_path`].
#[derive(Debug, Clone)]
pub struct DenseTauResult {
    pub kinks: Vec<Breakpoint>,
    pub segments: Vec<DenseSegment>,
}

/// Exhaustive-scan solution path in `tau` for `y(tau) = q + tau * b` at fixed
/// `lambda`, initialised by the dense lasso path at `tau_min`.
pub fn dense_tau_path(
    design: &DenseDesign,
    q: &[f64],
    b: &[f64],
    lambda: f64,
    tau_min: f64,
    tau_max: f64,
    k_max: usize,
) -> Result<DenseTauResult> {
    assert!(tau_min < tau_max, "empty tau range");
    let p = design.cols.len();
    let y_lo: Vec<f64> = q.iter().zip(b).map(|(qi, bi)| qi + tau_min * bi).collect();
    let init = dense_lambda_path(design, &y_lo, Some(lambda), k_max);
    let mut state = DenseState::new(design);
    match init {
        Ok(res) => {
            for (pat, &s) in res.active.iter().zip(&res.signs) {
                let j = design
                    .patterns
                    .iter()
                    .position(|p| p == pat)
                    .expect("pattern from the same design");
                state.include(j, s);
            }
        }
        // lambda at or above lambda_max at tau_min: the path starts empty.
        Err(Error::Input(_)) => {}
        Err(e) => return Err(e),
    }

    let tie_tol = TIE_REL * (tau_max - tau_min).max(1.0);
    let mut kinks = Vec::new();
    let mut segments = Vec::new();
    let mut tau = tau_min;
    // The initialising path generically ends strictly between kinks, so no
    // coefficient sits exactly at a boundary and nothing needs protecting.
    let mut just_included: Option<usize> = None;
    // Columns found linearly dependent on the active set; excluded until a
    // deletion shrinks the span (inclusions only grow it).
    let mut blocked: HashSet<usize> = HashSet::new();
    let mut completed = false;

    for _ in 0..50_000 {
        let y_t: Vec<f64> = q.iter().zip(b).map(|(qi, bi)| qi + tau * bi).collect();
        let (_, nu) = state.solve(&y_t, lambda, DirRhs::Response(b))?;
        let w = state.fitted_residual(&y_t);
        let v = state.image(&nu, design.n);
        let remaining = tau_max - tau;

        let (d_del, del_idx) = state.deletion(&nu, just_included, tie_tol);

        let mut d_inc = f64::INFINITY;
        let mut inc: Option<(usize, f64)> = None;
        for j in 0..p {
            if state.active.contains(&j) || state.is_alias(j) || blocked.contains(&j) {
                continue;
            }
            let rho = dot(&design.cols[j], &w);
            let gamma = dot(&design.cols[j], b) - dot(&design.cols[j], &v);
            // The boundary band lives in correlation units, like `lambda`
            // itself, while this path's tie tolerance is in tau units.
            let band = TIE_REL * lambda;
            let delta = if gamma > 0.0 {
                boundary_step(lambda - rho, gamma, band)
            } else if gamma < 0.0 {
                boundary_step(lambda + rho, -gamma, band)
            } else {
                f64::INFINITY
            };
            if delta < d_inc - tie_tol {
                d_inc = delta;
                inc = Some((j, gamma.signum()));
            } else if delta < d_inc {
                d_inc = delta;
            }
        }

        let deletion_wins = d_del <= d_inc + tie_tol;
        let step = if deletion_wins { d_del } else { d_inc };
        if step >= remaining - tie_tol {
            completed = true;
            break;
        }
        if !deletion_wins {
            // A column inside the active span rides the boundary with a
            // pinned correlation; its apparent crossing is roundoff noise
            // and including it would make the Gram singular.  Reject it
            // before advancing tau and rescan from the same state.
            let (j, _) = inc.expect("finite inclusion step has a pattern");
            if state.span_residual(j)? <= SPAN_RTOL {
                blocked.insert(j);
                continue;
            }
        }
        let tau_next = tau + step;
        segments.push(DenseSegment {
            lo: tau,
            hi: tau_next,
            patterns: state.patterns(),
            signs: state.signs.clone(),
        });
        tau = tau_next;
        just_included = None;
        let y_next: Vec<f64> = q.iter().zip(b).map(|(qi, bi)| qi + tau * bi).collect();
        if deletion_wins {
            let i = del_idx.expect("finite deletion step has an index");
            blocked.clear();
            let j = state.delete(i);
            state.solve(&y_next, lambda, DirRhs::Signs)?;
            kinks.push(state.breakpoint(tau, PathEvent::Delete, design.patterns[j].clone()));
        } else {
            let (j, sign) = inc.expect("finite inclusion step has a pattern");
            if state.active.len() + 1 > k_max {
                return Err(Error::CapExceeded(format!(
                    "active set would exceed k_max = {k_max}"
                )));
            }
            state.include(j, sign);
            just_included = Some(state.active.len() - 1);
            state.solve(&y_next, lambda, DirRhs::Signs)?;
            kinks.push(state.breakpoint(tau, PathEvent::Include, design.patterns[j].clone()));
        }
    }

    if !completed {
        return Err(Error::Numerical(
            "reference tau path exceeded its kink budget".into(),
        ));
    }
    segments.push(DenseSegment {
        lo: tau,
        hi: tau_max,
        patterns: state.patterns(),
        signs: state.signs.clone(),
    });
    Ok(DenseTauResult { kinks, segments })
}

/// Elastic-net lambda path oracle: expands the design, augments it with
/// `sqrt(ridge)` identity rows, and runs the dense lasso reference on it.
pub fn elnet_lambda_oracle(
    data: &Dataset,
    d: u32,
    ridge: f64,
    lambda_target: Option<f64>,
    cap: Option<usize>,
    k_max: usize,
) -> Result<DensePathResult> {
    let design = augment(&dense_expand(data, d, cap)?, ridge);
    let y = pad_response(data.y(), &design);
    dense_lambda_path(&design, &y, lambda_target, k_max)
}

/// Elastic-net tau path oracle on the augmented design (response direction
/// and offset are zero-padded, so `y(tau)` augments correctly for every tau).
#[allow(clippy::too_many_arguments)]
pub fn elnet_tau_oracle(
    data: &Dataset,
    d: u32,
    ridge: f64,
    q: &[f64],
    b: &[f64],
    lambda: f64,
    tau_min: f64,
    tau_max: f64,
    cap: Option<usize>,
    k_max: usize,
) -> Result<DenseTauResult> {
    let design = augment(&dense_expand(data, d, cap)?, ridge);
    let qa = pad_response(q, &design);
    let ba = pad_response(b, &design);
    dense_tau_path(&design, &qa, &ba, lambda, tau_min, tau_max, k_max)
}

/// The implicit-tree lambda path with pruning disabled: identical contract to
/// [`lasso::lambda_path`], visiting every node of every search.
pub fn unpruned_lambda_path(
    data: &Dataset,
    y: &[f64],
    cfg: &LambdaPathConfig,
) -> Result<lasso::LambdaPath> {
    let mut cfg = cfg.clone();
    cfg.prune = false;
    lasso::lambda_path(data, y, &cfg)
}

/// The implicit-tree tau path with pruning disabled.
pub fn unpruned_tau_path(
    data: &Dataset,
    q: &[f64],
    b: &[f64],
    cfg: &TauPathConfig,
) -> Result<TauPathResult> {
    let mut cfg = cfg.clone();
    cfg.prune = false;
    tau::tau_path(data, q, b, &cfg)
}
