//! Elastic-net variants of both paths.
//!
//! The elastic net adds a quadratic penalty `ridge/2 * |beta|^2` on top of
//! the lasso penalty.  Its solution path equals the plain lasso path on the
//! augmented design `[X; sqrt(ridge) * I]` with the response padded by
//! zeros — a fact the reference implementation in [`crate::oracle`] uses
//! literally.  The fast engines never materialise the augmentation: the Gram
//! matrix gains `ridge` on its diagonal, and active-pattern statistics gain
//! the matching correction (`x_k'w - ridge * beta_k`, `x_k'v + ridge * nu_k`),
//! while inactive-pattern statistics are untouched because augmented rows of
//! inactive columns meet only zeros.  That is why the tree search and its
//! pruning bounds carry over verbatim.
//!
//! One behavioural difference matters: with `ridge = 0` a pattern whose
//! column duplicates an active one is excluded as an alias (the Gram matrix
//! would go singular), whereas with `ridge > 0` no alias exclusion is
//! applied — duplicates are distinct coordinates of the augmented design.
//! Exact duplicates do violate the one-event-at-a-time position assumption
//! (they tie at every boundary crossing); the path then follows the same
//! deterministic tie conventions as the reference implementation rather
//! than splitting coefficients the way the exact optimum would.

use crate::data::Dataset;
use crate::lasso::{self, LambdaPath, LambdaPathConfig};
use crate::tau::{self, TauPathConfig, TauPathResult};
use crate::Result;

/// [`lasso::lambda_path`] with the ridge weight overridden.
pub fn lambda_path(
    data: &Dataset,
    y: &[f64],
    ridge: f64,
    cfg: &LambdaPathConfig,
) -> Result<LambdaPath> {
    let mut cfg = cfg.clone();
    cfg.ridge = ridge;
    lasso::lambda_path(data, y, &cfg)
}

/// [`tau::tau_path`] with the ridge weight overridden.
pub fn tau_path(
    data: &Dataset,
    q: &[f64],
    b: &[f64],
    ridge: f64,
    cfg: &TauPathConfig,
) -> Result<TauPathResult> {
    let mut cfg = cfg.clone();
    cfg.ridge = ridge;
    tau::tau_path(data, q, b, &cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use crate::pattern::Pattern;
    use approx::assert_relative_eq;

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
                2.0 * z(0) - 1.5 * z(1) * z(2) + z(3) + 0.3 * (next() - 0.5)
            })
            .collect();
        Dataset::new(cols, y, 1.0).unwrap()
    }

    #[test]
    fn matches_augmented_design_reference() {
        for &ridge in &[0.1, 1.0, 10.0] {
            for seed in 0..4 {
                let data = fixture(seed, 24, 6, 0.55);
                // Ridge removes the lasso's min(n, p) bound on the active
                // set, so the cap must exceed the full pattern count (41).
                let cfg = LambdaPathConfig {
                    d: 3,
                    lambda_target: None,
                    k_max: 60,
                    ..LambdaPathConfig::default()
                };
                let fast = lambda_path(&data, data.y(), ridge, &cfg).unwrap();
                let dense = oracle::elnet_lambda_oracle(
                    &data,
                    3,
                    ridge,
                    Some(fast.lambda_target),
                    None,
                    60,
                )
                .unwrap();
                assert_relative_eq!(fast.lambda_max, dense.lambda_max, max_relative = 1e-12);
                assert_eq!(
                    fast.breakpoints.len(),
                    dense.breakpoints.len(),
                    "ridge {ridge} seed {seed}"
                );
                for (a, b) in fast.breakpoints.iter().zip(&dense.breakpoints) {
                    assert_relative_eq!(a.param, b.param, max_relative = 1e-8, epsilon = 1e-12);
                    assert_eq!(a.event, b.event);
                    assert_eq!(a.pattern, b.pattern);
                }
                assert_eq!(fast.model.patterns(), &dense.active[..]);
                for (a, b) in fast.model.beta().iter().zip(&dense.beta) {
                    assert_relative_eq!(a, b, max_relative = 1e-8, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_ridge_is_the_plain_lasso() {
        let data = fixture(11, 26, 6, 0.5);
        let cfg = LambdaPathConfig {
            d: 3,
            k_max: 30,
            ..LambdaPathConfig::default()
        };
        let plain = lasso::lambda_path(&data, data.y(), &cfg).unwrap();
        let elnet = lambda_path(&data, data.y(), 0.0, &cfg).unwrap();
        assert_eq!(plain.breakpoints.len(), elnet.breakpoints.len());
        for (a, b) in plain.breakpoints.iter().zip(&elnet.breakpoints) {
            assert_eq!(a.param, b.param);
            assert_eq!(a.pattern, b.pattern);
        }
        assert_eq!(plain.model.beta(), elnet.model.beta());
    }

    #[test]
    fn duplicate_columns_follow_the_reference_conventions() {
        // An exact duplicate of an active column sits on the boundary up to
        // roundoff at any ridge, so both the engine and the reference
        // exclude it as an alias; the first-included duplicate stays.
        let col = vec![1.0, 0.0, 1.0, 0.5, 0.25];
        let other = vec![0.0, 1.0, 0.5, 0.0, 1.0];
        let y = vec![2.0, 0.4, 1.8, 0.9, 0.9];
        let data = Dataset::new(vec![col.clone(), col, other], y, 1.0).unwrap();
        let ridge = 0.5;
        let cfg = LambdaPathConfig {
            d: 1,
            lambda_target: Some(0.02),
            ..LambdaPathConfig::default()
        };
        let fast = lambda_path(&data, data.y(), ridge, &cfg).unwrap();
        assert_eq!(
            fast.aliases,
            vec![(Pattern::singleton(2), Pattern::singleton(1))]
        );
        let dense =
            oracle::elnet_lambda_oracle(&data, 1, ridge, Some(0.02), None, 10).unwrap();
        assert_eq!(fast.breakpoints.len(), dense.breakpoints.len());
        for (a, b) in fast.breakpoints.iter().zip(&dense.breakpoints) {
            assert_relative_eq!(a.param, b.param, max_relative = 1e-9, epsilon = 1e-12);
            assert_eq!(a.pattern, b.pattern);
        }
        assert_eq!(fast.model.patterns(), &dense.active[..]);
        for (a, b) in fast.model.beta().iter().zip(&dense.beta) {
            assert_relative_eq!(a, b, max_relative = 1e-8, epsilon = 1e-12);
        }
        // The first duplicate is the one the tie conventions keep.
        assert!(fast.model.position(&Pattern::singleton(1)).is_some());
    }

    #[test]
    fn tau_path_with_ridge_matches_reference() {
        let data = fixture(21, 22, 5, 0.6);
        let y = data.y().to_vec();
        let ridge = 0.7;
        let (lmax, _, _) = lasso::lambda_max(&data, &y, 2).unwrap();
        let lambda = 0.4 * lmax;
        let b: Vec<f64> = (0..data.n()).map(|i| ((i % 4) as f64 - 1.5) / 30.0).collect();
        let q: Vec<f64> = y.iter().zip(&b).map(|(yi, bi)| yi - bi).collect();
        let cfg = TauPathConfig::new(lambda, 2, -3.0, 5.0);
        let fast = tau_path(&data, &q, &b, ridge, &cfg).unwrap();
        let dense =
            oracle::elnet_tau_oracle(&data, 2, ridge, &q, &b, lambda, -3.0, 5.0, None, 100)
                .unwrap();
        assert_eq!(fast.kinks.len(), dense.kinks.len());
        for (a, bk) in fast.kinks.iter().zip(&dense.kinks) {
            assert_relative_eq!(a.param, bk.param, max_relative = 1e-8, epsilon = 1e-12);
            assert_eq!(a.event, bk.event);
            assert_eq!(a.pattern, bk.pattern);
        }
    }
}
