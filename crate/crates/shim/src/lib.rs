//! Sparse high-order interaction models with exact homotopy paths and
//! post-selection inference.
//!
//! Given an n x m design `Z` with entries in [0, 1], the model space consists of
//! all elementwise products of up to `d` distinct columns ("interaction
//! patterns").  The number of such patterns grows combinatorially, so this
//! crate never materialises the expanded design: paths and searches walk the
//! canonical pattern tree implicitly and discard whole subtrees with
//! branch-and-bound bounds that exploit the anti-monotonicity of products of
//! [0, 1] columns.
//!
//! Two piecewise-linear solution paths are provided:
//!
//! * [`lasso::lambda_path`] — the regularisation path of the (optionally
//!   ridge-regularised) lasso over all interaction patterns, from
//!   `lambda_max` down to a target value;
//! * [`tau::tau_path`] — the solution path in the response direction
//!   `y(tau) = q + tau * b` at a fixed `lambda`, which is the computational
//!   core of exact conditional ("selective") inference.
//!
//! On top of the tau path, [`inference`] computes exact truncated-normal
//! p-values and confidence intervals for the least-squares coefficients of the
//! selected patterns, conditional on the selection event.  [`baselines`]
//! implements the single-polytope region and data-splitting alternatives,
//! [`oracle`] hosts slow but independent reference implementations used to
//! validate the fast ones, and [`experiment`] is a seeded Monte Carlo harness
//! for error-rate and power studies.

pub mod baselines;
pub mod data;
pub mod elnet;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod inference;
pub mod io;
pub mod lasso;
pub mod oracle;
pub mod path;
pub mod pattern;
pub mod stats;
pub mod synth;
pub mod tau;
pub mod truncnorm;

mod active;

pub use active::ActiveModel;
pub use data::Dataset;
pub use error::Error;
pub use pattern::Pattern;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) mod vecops {
    /// Dot product of two equal-length slices.
    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    /// `out += c * a`.
    pub fn axpy(out: &mut [f64], c: f64, a: &[f64]) {
        debug_assert_eq!(out.len(), a.len());
        for (o, x) in out.iter_mut().zip(a) {
            *o += c * x;
        }
    }
}
