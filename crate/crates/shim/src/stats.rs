//! Small statistical utilities used by experiments and acceptance checks.

use statrs::distribution::{Binomial, DiscreteCDF};

/// One-sample Kolmogorov–Smirnov distance between a sample and U(0, 1).
pub fn ks_distance_uniform(sample: &[f64]) -> f64 {
    let mut xs: Vec<f64> = sample.iter().map(|&x| x.clamp(0.0, 1.0)).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in a p-value sample"));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let hi = (i as f64 + 1.0) / n - x;
        let lo = x - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

/// Asymptotic 1% critical value of `sqrt(n) * D` for the one-sample KS
/// statistic (Kolmogorov distribution).
pub const KS_SQRT_N_CRIT_1PCT: f64 = 1.6276;

/// Equal-tailed acceptance band for a Binomial(n, p) count at the given
/// confidence: the smallest `lo` and `hi` with
/// `P(X < lo) <= (1-conf)/2` and `P(X > hi) <= (1-conf)/2`.
pub fn binomial_band(n: u64, p: f64, conf: f64) -> (u64, u64) {
    assert!(n > 0 && (0.0..1.0).contains(&p) && (0.0..1.0).contains(&conf));
    let tail = (1.0 - conf) / 2.0;
    let dist = Binomial::new(p, n).expect("valid binomial");
    let mut lo = 0u64;
    while lo < n && dist.cdf(lo) < tail {
        lo += 1;
    }
    let mut hi = n;
    while hi > 0 && 1.0 - dist.cdf(hi - 1) < tail {
        hi -= 1;
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_of_a_uniform_grid_is_small() {
        let n = 1000;
        let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_distance_uniform(&grid);
        assert!(d <= 0.5 / n as f64 + 1e-12, "d = {d}");
    }

    #[test]
    fn ks_detects_a_shifted_sample() {
        let n = 1000;
        let shifted: Vec<f64> = (0..n).map(|i| (i as f64 / n as f64).powi(3)).collect();
        let d = ks_distance_uniform(&shifted);
        assert!((n as f64).sqrt() * d > KS_SQRT_N_CRIT_1PCT);
    }

    #[test]
    fn binomial_band_brackets_the_mean_with_correct_tails() {
        let (lo, hi) = binomial_band(200, 0.05, 0.95);
        assert!(lo <= 10 && 10 <= hi);
        let dist = Binomial::new(0.05, 200).unwrap();
        if lo > 0 {
            assert!(dist.cdf(lo - 1) <= 0.025 + 1e-12);
        }
        assert!(1.0 - dist.cdf(hi) <= 0.025 + 1e-12);
        // The band is as tight as those tail conditions allow.
        assert!(dist.cdf(lo) > 0.025);
        assert!(1.0 - dist.cdf(hi.saturating_sub(1)) > 0.025);
    }
}
