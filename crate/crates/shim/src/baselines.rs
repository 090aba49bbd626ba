//! Baseline characterisations of the conditioning event.
//!
//! * [`polytope_interval`] — conditions on the observed active set *and*
//!   its signs.  That event is a convex polyhedron in response space, so its
//!   intersection with the statistic line is a single interval.  It is
//!   conservative relative to the homotopy region (which unions every sign
//!   arrangement reaching the same set), hence its p-values are valid but
//!   its intervals systematically wider.  The inactive constraints still
//!   range over the whole pattern space; a bound-based tree sweep keeps that
//!   implicit.
//!
//! * [`data_split_inference`] — sidesteps conditioning entirely: select on
//!   one half of the rows, run classical z-tests on the other.  Valid, but
//!   pays twice — selection sees less data and inference does too.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::active::ActiveModel;
use crate::data::Dataset;
use crate::error::Error;
use crate::inference::{
    resolve_lambda, InferenceConfig, InferenceReport, PatternTest, TestTarget,
    TAU_HALF_WIDTH_SDS,
};
use crate::lasso::{self, LambdaPathConfig};
use crate::path::columns_equal;
use crate::pattern::{bound_abs_dot, walk};
use crate::vecops::dot;
use crate::Result;

/// The statistic interval on which the fit keeps the observed active set
/// with the observed signs, intersected with the working range
/// `stat +- TAU_HALF_WIDTH_SDS * sd`.  Returns `(lo, hi, nodes)` where
/// `nodes` counts tree nodes the inactive-constraint sweep evaluated.
pub fn polytope_interval(
    data: &Dataset,
    model: &ActiveModel,
    target: &TestTarget,
    lambda: f64,
    cfg: &InferenceConfig,
) -> Result<(f64, f64, u64)> {
    let mut lo = target.stat - TAU_HALF_WIDTH_SDS * target.sd;
    let mut hi = target.stat + TAU_HALF_WIDTH_SDS * target.sd;

    // Coefficients along the line: beta(tau) = c0 + tau * nu.
    let (c0, nu) = if model.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        let mut rhs = model.xty(&target.q);
        for (r, s) in rhs.iter_mut().zip(model.signs()) {
            *r -= lambda * s;
        }
        (model.solve(&rhs), model.tau_direction(&target.b))
    };

    // Sign constraints on the active coefficients.
    for j in 0..model.len() {
        let s = model.signs()[j];
        let u = s * c0[j];
        let w = s * nu[j];
        // u + tau * w >= 0
        if w > 0.0 {
            lo = lo.max(-u / w);
        } else if w < 0.0 {
            hi = hi.min(-u / w);
        } else if u < 0.0 {
            return Err(Error::Numerical(format!(
                "sign constraint for {} infeasible along the statistic line",
                model.patterns()[j]
            )));
        }
    }

    // Inactive constraints |x' (r0 + tau * g)| <= lambda over the whole
    // pattern tree, where r0 + tau * g is the residual along the line.
    let r0 = sub(&target.q, &model.image(&c0));
    let g = sub(&target.b, &model.image(&nu));
    let mut nodes = 0u64;
    let active: Vec<&[u32]> = model.patterns().iter().map(|p| p.indices()).collect();
    // Duplicates of active columns are excluded from selection, so they
    // impose no constraint; their correlation is pinned at the boundary and
    // the constraint line degenerates to noise over roundoff.
    let mut visit = |pat: &[u32], col: &[f64]| -> bool {
        nodes += 1;
        let skip = active.contains(&pat)
            || (0..model.len()).any(|k| columns_equal(model.column(k), col));
        if !skip {
            let a = dot(col, &r0);
            let c = dot(col, &g);
            // a + tau * c in [-lambda, lambda]
            if c > 0.0 {
                hi = hi.min((lambda - a) / c);
                lo = lo.max((-lambda - a) / c);
            } else if c < 0.0 {
                lo = lo.max((lambda - a) / c);
                hi = hi.min((-lambda - a) / c);
            }
        }
        if !cfg.prune {
            return true;
        }
        // No descendant can cut into [lo, hi] if its constraint holds
        // everywhere on it.
        let reach = bound_abs_dot(col, &r0) + lo.abs().max(hi.abs()) * bound_abs_dot(col, &g);
        reach > lambda
    };
    walk(data, cfg.d, &mut visit);

    if !(lo <= target.stat && target.stat <= hi) {
        return Err(Error::Numerical(format!(
            "observed statistic {} fell outside its sign polytope [{lo}, {hi}]",
            target.stat
        )));
    }
    Ok((lo, hi, nodes))
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Splits the rows in half at random, selects on the first half, and runs
/// classical z-tests for the selected patterns on the second half.  No
/// truncation is involved, so the report's regions are the whole line.
pub fn data_split_inference(data: &Dataset, cfg: &InferenceConfig) -> Result<InferenceReport> {
    if data.n() < 4 {
        return Err(Error::Input(format!(
            "data splitting needs at least 4 rows, got {}",
            data.n()
        )));
    }
    let mut rows: Vec<usize> = (0..data.n()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rows.shuffle(&mut rng);
    let n_select = data.n().div_ceil(2);
    let select = data.subset_rows(&rows[..n_select])?;
    let holdout = data.subset_rows(&rows[n_select..])?;

    let (lambda_max, _, _) = lasso::lambda_max(&select, select.y(), cfg.d)?;
    let lambda = resolve_lambda(cfg, lambda_max)?;
    let lcfg = LambdaPathConfig {
        d: cfg.d,
        lambda_target: Some(lambda),
        ridge: cfg.ridge,
        k_max: cfg.k_max,
        prune: cfg.prune,
        max_kinks: cfg.max_kinks,
    };
    let path = lasso::lambda_path(&select, select.y(), &lcfg)?;
    let selected = path.model.patterns().to_vec();
    let signs = path.model.signs().to_vec();

    let mut tests = Vec::with_capacity(selected.len());
    let mut beta_hat = vec![0.0; selected.len()];
    if !selected.is_empty() {
        // Unpenalised least squares on the held-out half.
        let mut refit = ActiveModel::new(lambda, 0.0);
        for (pat, &s) in selected.iter().zip(&signs) {
            refit.include(pat.clone(), crate::pattern::feature_column(&holdout, pat), s);
        }
        refit.factorize()?;
        beta_hat = refit.solve(&refit.xty(holdout.y()));
        let sigma2 = data.sigma2();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let z_crit = normal.inverse_cdf(1.0 - cfg.alpha / 2.0);
        for (j, pat) in selected.iter().enumerate() {
            // var(beta_j) = sigma^2 * (G^{-1})_jj on the held-out design.
            let mut e = vec![0.0; selected.len()];
            e[j] = 1.0;
            let gjj = refit.solve(&e)[j];
            if !(gjj > 0.0 && gjj.is_finite()) {
                tests.push(PatternTest {
                    pattern: pat.clone(),
                    sign: signs[j],
                    beta: beta_hat[j],
                    stat: None,
                    sd: None,
                    p_value: None,
                    ci_lower: None,
                    ci_upper: None,
                    region: Vec::new(),
                    kinks: None,
                    nodes: None,
                    error: Some(format!(
                        "held-out design is degenerate for pattern {pat}"
                    )),
                });
                continue;
            }
            let se = (sigma2 * gjj).sqrt();
            let z = beta_hat[j] / se;
            let p = (2.0 * normal.sf(z.abs())).min(1.0);
            tests.push(PatternTest {
                pattern: pat.clone(),
                sign: signs[j],
                beta: beta_hat[j],
                stat: Some(beta_hat[j]),
                sd: Some(se),
                p_value: Some(p),
                ci_lower: Some(beta_hat[j] - z_crit * se),
                ci_upper: Some(beta_hat[j] + z_crit * se),
                region: vec![(f64::NEG_INFINITY, f64::INFINITY)],
                kinks: None,
                nodes: None,
                error: None,
            });
        }
    }

    Ok(InferenceReport {
        method: crate::inference::Method::DataSplit,
        lambda,
        lambda_max,
        alpha: cfg.alpha,
        sigma2: data.sigma2(),
        selected,
        signs,
        beta: beta_hat,
        tests,
        selection_nodes: path.nodes_total,
        inference_nodes: 0,
    })
}
