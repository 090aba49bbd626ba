//! Truncated-normal tail probabilities, computed in log space.
//!
//! Selective p-values condition a Gaussian statistic on a truncation region
//! that can sit dozens of standard deviations from the mean being tested
//! (confidence-interval bisection deliberately walks the mean that far).
//! Naive `cdf(b) - cdf(a)` arithmetic returns 0/0 there, so every mass in
//! this module is a log-probability: tails via `erfc` while it is
//! representable and via the standard asymptotic expansion beyond, interval
//! masses via `log1p`/`expm1` complements.

use std::f64::consts::{LN_2, SQRT_2};

use libm::erfc;

use crate::error::Error;
use crate::Result;

/// ln(2 * pi)
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Below this, `0.5 * erfc` loses its exponent to denormals; switch to the
/// asymptotic expansion (reached near t = 36.4, where the two branches agree
/// to about 1e-13 in log space).
const ERFC_FLOOR: f64 = 1e-290;

/// `ln(1 - exp(x))` for `x <= 0`.
pub(crate) fn ln1mexp(x: f64) -> f64 {
    if x >= 0.0 {
        if x == 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::NAN
        }
    } else if x > -LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln P(Z > t)` for a standard normal `Z`, valid over the whole real line
/// (including infinite `t`).
pub fn log_normal_tail(t: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return f64::NEG_INFINITY;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    if t < 0.0 {
        return ln1mexp(log_normal_tail(-t));
    }
    let half_erfc = 0.5 * erfc(t / SQRT_2);
    if half_erfc > ERFC_FLOOR {
        half_erfc.ln()
    } else {
        // P(Z > t) ~ phi(t)/t * (1 - 1/t^2 + 3/t^4 - 15/t^6 + ...)
        let t2 = t * t;
        let series = -1.0 / t2 + 3.0 / (t2 * t2) - 15.0 / (t2 * t2 * t2);
        -0.5 * t2 - t.ln() - 0.5 * LN_2PI + series.ln_1p()
    }
}

/// `ln P(a < Z <= b)` for a standard normal `Z` and `a <= b` (infinite
/// endpoints allowed).
pub fn log_interval_mass(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() || a > b {
        return f64::NAN;
    }
    if a == b {
        return f64::NEG_INFINITY;
    }
    if a >= 0.0 {
        // Both endpoints in the upper tail: difference of upper tails.
        let la = log_normal_tail(a);
        let lb = log_normal_tail(b);
        la + ln1mexp(lb - la)
    } else if b <= 0.0 {
        // Mirror into the upper tail.
        let la = log_normal_tail(-b);
        let lb = log_normal_tail(-a);
        la + ln1mexp(lb - la)
    } else {
        // Straddles zero: 1 minus both tails, neither of which exceeds 1/2.
        let upper = log_normal_tail(b).exp();
        let lower = log_normal_tail(-a).exp();
        (-(upper + lower)).ln_1p()
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = terms.iter().map(|&t| (t - max).exp()).sum();
    max + sum.ln()
}

/// Both tails `(P(T <= x | T in R), P(T > x | T in R))` of a normal with the
/// given mean and standard deviation truncated to the union of intervals
/// `region`, each computed in log space so neither underflows.
///
/// Intervals must be non-decreasing and disjoint; infinite endpoints are
/// allowed (the whole line is `[(-inf, inf)]`).
pub fn truncated_tails(
    x: f64,
    mean: f64,
    sd: f64,
    region: &[(f64, f64)],
) -> Result<(f64, f64)> {
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::Numerical(format!(
            "truncated normal needs a positive finite sd, got {sd}"
        )));
    }
    if !x.is_finite() {
        return Err(Error::Numerical(format!(
            "truncated normal evaluated at a non-finite point {x}"
        )));
    }
    if region.is_empty() {
        return Err(Error::Numerical("empty truncation region".into()));
    }
    let z = |t: f64| {
        if t.is_finite() {
            (t - mean) / sd
        } else {
            t
        }
    };
    let zx = z(x);
    let mut all = Vec::with_capacity(region.len());
    let mut below = Vec::new();
    let mut above = Vec::new();
    let mut prev_hi = f64::NEG_INFINITY;
    for &(lo, hi) in region {
        if !(lo <= hi) || lo < prev_hi {
            return Err(Error::Numerical(format!(
                "truncation intervals must be sorted and disjoint (offender [{lo}, {hi}])"
            )));
        }
        prev_hi = hi;
        let (a, b) = (z(lo), z(hi));
        if a >= b {
            continue;
        }
        all.push(log_interval_mass(a, b));
        if b <= zx {
            below.push(log_interval_mass(a, b));
        } else if a < zx {
            below.push(log_interval_mass(a, zx));
        }
        if a >= zx {
            above.push(log_interval_mass(a, b));
        } else if b > zx {
            above.push(log_interval_mass(zx, b));
        }
    }
    let total = log_sum_exp(&all);
    if total == f64::NEG_INFINITY {
        return Err(Error::Numerical(
            "truncation region carries no probability mass".into(),
        ));
    }
    let cdf = (log_sum_exp(&below) - total).exp().clamp(0.0, 1.0);
    let sf = (log_sum_exp(&above) - total).exp().clamp(0.0, 1.0);
    Ok((cdf, sf))
}

/// `P(T <= x | T in R)`; see [`truncated_tails`].
pub fn truncated_cdf(x: f64, mean: f64, sd: f64, region: &[(f64, f64)]) -> Result<f64> {
    truncated_tails(x, mean, sd, region).map(|(cdf, _)| cdf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::distribution::{ContinuousCDF, Normal};

    const LINE: &[(f64, f64)] = &[(f64::NEG_INFINITY, f64::INFINITY)];

    #[test]
    fn tail_matches_reference_values() {
        assert_relative_eq!(log_normal_tail(0.0).exp(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(
            log_normal_tail(1.0).exp(),
            0.158_655_253_931_457_07,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            log_normal_tail(-1.0).exp(),
            0.841_344_746_068_542_9,
            max_relative = 1e-13
        );
    }

    #[test]
    fn tail_branches_agree_at_the_switchover() {
        // Just below the erfc floor vs just above: the asymptotic branch
        // continues the erfc branch smoothly.
        for &t in &[34.0, 35.0, 36.0, 36.3] {
            let exact = (0.5 * erfc(t / SQRT_2)).ln();
            assert_relative_eq!(log_normal_tail(t), exact, max_relative = 1e-11);
        }
        // Far past the floor the expansion keeps producing finite,
        // strictly decreasing values.
        let mut prev = log_normal_tail(37.0);
        for &t in &[40.0, 60.0, 100.0, 1_000.0] {
            let lt = log_normal_tail(t);
            assert!(lt.is_finite() && lt < prev);
            prev = lt;
        }
    }

    #[test]
    fn interval_mass_matches_erf() {
        assert_relative_eq!(
            log_interval_mass(-1.0, 1.0).exp(),
            0.682_689_492_137_085_9,
            max_relative = 1e-13
        );
        // statrs's cdf is itself only ~1e-10 accurate; it serves as an
        // independent cross-check, not a precision reference.
        let normal = Normal::new(0.0, 1.0).unwrap();
        for &(a, b) in &[(-2.5, -0.5), (0.25, 1.75), (-0.3, 2.2), (-9.0, -7.5)] {
            let direct = normal.cdf(b) - normal.cdf(a);
            assert_relative_eq!(log_interval_mass(a, b).exp(), direct, max_relative = 1e-8);
        }
        assert_eq!(log_interval_mass(1.0, 1.0), f64::NEG_INFINITY);
        assert_relative_eq!(
            log_interval_mass(f64::NEG_INFINITY, f64::INFINITY).exp(),
            1.0
        );
    }

    #[test]
    fn deep_tail_interval_mass_stays_finite() {
        // P(38 < Z < 38.05) underflows any direct cdf difference; in log
        // space it is the lower tail minus ln(1 - P(Z>38.05)/P(Z>38)), and
        // the tail ratio is ~exp(-38 * 0.05) to leading order.
        let lm = log_interval_mass(38.0, 38.05);
        assert!(lm.is_finite());
        let ratio = (log_normal_tail(38.05) - log_normal_tail(38.0)).exp();
        let expect = log_normal_tail(38.0) + (1.0 - ratio).ln();
        assert_relative_eq!(lm, expect, max_relative = 1e-12);
        assert!(lm < log_normal_tail(38.0));
        assert_relative_eq!(lm - log_normal_tail(38.0), -0.1616, epsilon = 1e-3);
    }

    #[test]
    fn whole_line_truncation_is_the_plain_cdf() {
        // statrs's cdf is a cross-check, not a precision reference: its erfc
        // is only ~1e-10 accurate, so the comparison tolerance reflects that.
        let normal = Normal::new(0.5, 2.0).unwrap();
        for &x in &[-3.0, -0.25, 0.5, 1.0, 4.5] {
            let (cdf, sf) = truncated_tails(x, 0.5, 2.0, LINE).unwrap();
            assert_relative_eq!(cdf, normal.cdf(x), max_relative = 1e-9);
            assert_relative_eq!(cdf + sf, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn split_region_matches_direct_arithmetic() {
        let region = [(-2.0, -1.0), (1.0, 2.0)];
        let normal = Normal::new(0.0, 1.0).unwrap();
        let m1 = normal.cdf(-1.0) - normal.cdf(-2.0);
        let m2 = normal.cdf(2.0) - normal.cdf(1.0);
        let x = 1.5;
        let expect = (m1 + normal.cdf(x) - normal.cdf(1.0)) / (m1 + m2);
        let (cdf, sf) = truncated_tails(x, 0.0, 1.0, &region).unwrap();
        // statrs cdf is the cross-check here (its erfc is ~1e-10 accurate).
        assert_relative_eq!(cdf, expect, max_relative = 1e-9);
        assert_relative_eq!(sf, 1.0 - expect, max_relative = 1e-9);
    }

    #[test]
    fn far_mean_keeps_both_tails_meaningful() {
        // Mean 30 sds past the region: the conditional mass piles up at the
        // region's top, and both tails stay genuine numbers instead of
        // degenerating to 0/0.  The tail ratio below 0.9 vs above is
        // exp(-29.05) / ... ~ e^{-29*0.1} to leading order.
        let region = [(-1.0, 1.0)];
        let (cdf, sf) = truncated_tails(0.9, 30.0, 1.0, &region).unwrap();
        assert!(cdf > 0.0 && cdf < 0.1, "cdf = {cdf}");
        assert!(sf > 0.9 && sf < 1.0, "sf = {sf}");
        assert_relative_eq!(cdf + sf, 1.0, max_relative = 1e-12);
        // And monotone in the mean, which confidence-interval bisection
        // relies on.
        let mut prev = 1.0;
        for &mu in &[-20.0, -5.0, 0.0, 5.0, 20.0] {
            let f = truncated_cdf(0.5, mu, 1.0, &region).unwrap();
            assert!(f <= prev + 1e-15, "cdf must fall as the mean rises");
            prev = f;
        }
    }

    #[test]
    fn degenerate_regions_are_errors() {
        assert!(truncated_tails(0.0, 0.0, 1.0, &[]).is_err());
        assert!(truncated_tails(0.0, 0.0, 1.0, &[(1.0, 1.0)]).is_err());
        assert!(truncated_tails(0.0, 0.0, 1.0, &[(1.0, 2.0), (1.5, 3.0)]).is_err());
        assert!(truncated_tails(0.0, 0.0, -1.0, &[(0.0, 1.0)]).is_err());
    }
}
