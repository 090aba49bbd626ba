use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::data::Dataset;
use crate::error::Error;
use crate::pattern::{max_abs_search, Pattern};
use crate::vecops::{axpy, dot};
use crate::Result;

/// The state of a path solver at one point of a solution path: the active
/// patterns with their cached feature columns, equicorrelation signs, and
/// coefficients, together with the penalty parameters.
///
/// The active Gram matrix (plus `ridge` on the diagonal for elastic nets) is
/// re-factorized after every membership change rather than updated
/// incrementally; active sets are small, and a fresh factorization keeps the
/// optimality residuals at solver precision along the whole path.
#[derive(Debug, Clone)]
pub struct ActiveModel {
    patterns: Vec<Pattern>,
    cols: Vec<Vec<f64>>,
    signs: Vec<f64>,
    beta: Vec<f64>,
    lambda: f64,
    ridge: f64,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl ActiveModel {
    pub fn new(lambda: f64, ridge: f64) -> Self {
        ActiveModel {
            patterns: Vec::new(),
            cols: Vec::new(),
            signs: Vec::new(),
            beta: Vec::new(),
            lambda,
            ridge,
            chol: None,
        }
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    /// Active patterns sorted lexicographically — the canonical form used to
    /// compare selection events.
    pub fn pattern_set(&self) -> Vec<Pattern> {
        let mut set = self.patterns.clone();
        set.sort();
        set
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.cols[i]
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn set_lambda(&mut self, lambda: f64) {
        self.lambda = lambda;
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn position(&self, pattern: &Pattern) -> Option<usize> {
        self.patterns.iter().position(|p| p == pattern)
    }

    /// Adds a pattern with its feature column and equicorrelation sign.
    /// The coefficient starts at zero; call [`ActiveModel::factorize`] and
    /// refit before using the model.
    pub fn include(&mut self, pattern: Pattern, col: Vec<f64>, sign: f64) {
        self.patterns.push(pattern);
        self.cols.push(col);
        self.signs.push(sign);
        self.beta.push(0.0);
        self.chol = None;
    }

    pub fn remove(&mut self, idx: usize) -> Pattern {
        self.cols.remove(idx);
        self.signs.remove(idx);
        self.beta.remove(idx);
        self.chol = None;
        self.patterns.remove(idx)
    }

    /// Factorizes the active Gram matrix (plus the ridge diagonal).  On
    /// failure the error names the pattern at which positive definiteness is
    /// first lost.
    pub fn factorize(&mut self) -> Result<()> {
        if self.patterns.is_empty() {
            self.chol = None;
            return Ok(());
        }
        let gram = self.gram();
        match Cholesky::new(gram.clone()) {
            Some(c) => {
                self.chol = Some(c);
                Ok(())
            }
            None => {
                // Find the first leading principal minor that fails; the
                // corresponding pattern is the one that broke definiteness.
                let mut offender = self.patterns.len() - 1;
                for k in 1..=self.patterns.len() {
                    if Cholesky::new(gram.view((0, 0), (k, k)).into_owned()).is_none() {
                        offender = k - 1;
                        break;
                    }
                }
                Err(Error::Degeneracy {
                    pattern: self.patterns[offender].to_string(),
                })
            }
        }
    }

    fn gram(&self) -> DMatrix<f64> {
        let k = self.cols.len();
        DMatrix::from_fn(k, k, |r, c| {
            dot(&self.cols[r], &self.cols[c]) + if r == c { self.ridge } else { 0.0 }
        })
    }

    /// Solves `(X'X + ridge I) u = rhs` using the cached factorization.
    /// An empty active set yields the empty solution (the tau path runs
    /// through legitimately empty stretches).
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        if self.cols.is_empty() {
            return Vec::new();
        }
        let chol = self
            .chol
            .as_ref()
            .expect("factorize() must succeed before solving");
        let u = chol.solve(&DVector::from_column_slice(rhs));
        u.iter().copied().collect()
    }

    /// X_A' y for the active columns.
    pub fn xty(&self, y: &[f64]) -> Vec<f64> {
        self.cols.iter().map(|c| dot(c, y)).collect()
    }

    /// X_A c — the length-n image of an active-coordinate vector.
    pub fn image(&self, coef: &[f64]) -> Vec<f64> {
        let n = self.cols.first().map_or(0, Vec::len);
        let mut out = vec![0.0; n];
        for (c, col) in coef.iter().zip(&self.cols) {
            axpy(&mut out, *c, col);
        }
        out
    }

    /// Recomputes the coefficients at the current `lambda` from the
    /// stationarity system `(X'X + ridge I) beta = X'y - lambda s`.
    pub fn refit(&mut self, y: &[f64]) -> Result<()> {
        if self.patterns.is_empty() {
            return Ok(());
        }
        if self.chol.is_none() {
            self.factorize()?;
        }
        let mut rhs = self.xty(y);
        for (r, s) in rhs.iter_mut().zip(&self.signs) {
            *r -= self.lambda * s;
        }
        self.beta = self.solve(&rhs);
        Ok(())
    }

    /// Residual `y - X_A beta` at the current coefficients.
    pub fn residual(&self, y: &[f64]) -> Vec<f64> {
        let mut w = y.to_vec();
        for (b, col) in self.beta.iter().zip(&self.cols) {
            axpy(&mut w, -b, col);
        }
        w
    }

    /// Direction of coefficient motion per unit decrease of lambda:
    /// `(X'X + ridge I)^{-1} s`.
    pub fn lambda_direction(&self) -> Vec<f64> {
        self.solve(&self.signs.clone())
    }

    /// Direction of coefficient motion per unit increase of tau when the
    /// response moves along `b`: `(X'X + ridge I)^{-1} X'b`.
    pub fn tau_direction(&self, b: &[f64]) -> Vec<f64> {
        self.solve(&self.xty(b))
    }

    /// Relative residual of `col` after projecting it onto the span of the
    /// active columns.  Near zero means `col` is linearly dependent on the
    /// active set.  Uses the current factorization, so it measures the exact
    /// projection only when `ridge` is zero — the one case where dependence
    /// matters, since a positive ridge keeps the system positive definite.
    pub fn span_residual(&self, col: &[f64]) -> f64 {
        let coef = self.tau_direction(col);
        let fit = self.image(&coef);
        let mut res = 0.0;
        let mut nrm = 0.0;
        for (c, f) in col.iter().zip(&fit) {
            res += (c - f) * (c - f);
            nrm += c * c;
        }
        if nrm == 0.0 {
            0.0
        } else {
            (res / nrm).sqrt()
        }
    }

    /// Least-squares direction for testing the `idx`-th selected coefficient:
    /// `eta = X_A (X_A'X_A)^{-1} e_idx`, so that `eta'y` is that pattern's
    /// coefficient in the unpenalised least-squares refit on the selected
    /// columns.  Always uses the plain Gram matrix, whatever `ridge` the
    /// selection used.
    pub fn ls_target_direction(&self, idx: usize) -> Result<Vec<f64>> {
        let k = self.cols.len();
        assert!(idx < k, "target index out of range");
        let gram = DMatrix::from_fn(k, k, |r, c| dot(&self.cols[r], &self.cols[c]));
        let chol = Cholesky::new(gram).ok_or_else(|| Error::Degeneracy {
            pattern: self.patterns[idx].to_string(),
        })?;
        let mut e = DVector::zeros(k);
        e[idx] = 1.0;
        let u = chol.solve(&e);
        Ok(self.image(u.as_slice()))
    }

    /// Optimality residuals at the current state: the worst active
    /// stationarity violation `|x_k'w - ridge beta_k - lambda s_k|` and the
    /// largest inactive correlation found by a (pruned) sweep of the tree.
    pub fn kkt_residuals(&self, data: &Dataset, y: &[f64], d: u32, prune: bool) -> KktReport {
        let w = self.residual(y);
        let mut active_max = 0.0_f64;
        for i in 0..self.len() {
            let c = dot(&self.cols[i], &w) - self.ridge * self.beta[i];
            active_max = active_max.max((c - self.lambda * self.signs[i]).abs());
        }
        let active_set: std::collections::HashSet<&Pattern> = self.patterns.iter().collect();
        // Duplicates of active columns are not selection candidates, so
        // their pinned boundary correlation (lambda + ridge * |beta| under a
        // ridge) is conventional, not a violation.
        let sweep = max_abs_search(data, d, &w, prune, |pat, col| {
            active_set.contains(&Pattern::from_slice(pat))
                || self.cols.iter().any(|c| crate::path::columns_equal(c, col))
        });
        KktReport {
            active_max_violation: active_max,
            inactive_max_correlation: sweep.value,
            inactive_argmax: sweep.pattern,
            nodes: sweep.nodes,
        }
    }
}

/// Summary of an optimality check at one path point.
#[derive(Debug, Clone)]
pub struct KktReport {
    pub active_max_violation: f64,
    pub inactive_max_correlation: f64,
    pub inactive_argmax: Option<Pattern>,
    pub nodes: u64,
}

impl KktReport {
    /// Worst violation, treating inactive correlations above `lambda` as
    /// violations.
    pub fn worst(&self, lambda: f64) -> f64 {
        self.active_max_violation
            .max(self.inactive_max_correlation - lambda)
    }
}
