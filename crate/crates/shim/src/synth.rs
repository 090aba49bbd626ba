//! Synthetic data generation for experiments and benchmarks.
//!
//! Base columns are sparse binary: each entry is 1 with probability
//! `1 - zeta` and 0 otherwise, so `zeta` directly controls how fast
//! interaction columns thin out with order.  The response is the true
//! interaction model plus Gaussian noise with a known standard deviation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::Error;
use crate::pattern::Pattern;
use crate::Result;

/// A true model: coefficients attached to interaction patterns.
pub type TrueModel = Vec<(f64, Pattern)>;

/// Options for [`generate`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct SynthConfig {
    pub n: usize,
    pub m: u32,
    /// Probability that a base entry is zero.
    pub zeta: f64,
    /// Noise standard deviation (recorded in the dataset as known variance).
    pub sigma: f64,
    /// True mean structure; empty for a pure-noise null.
    pub model: TrueModel,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 100,
            m: 8,
            zeta: 0.5,
            sigma: 1.0,
            model: Vec::new(),
            seed: 0,
        }
    }
}

/// Parses a true-model string of comma- or whitespace-separated
/// `coef:pattern` terms, e.g. `0.5:1, -2:2*3, 3:4*5*6`.
pub fn parse_model(s: &str) -> Result<TrueModel> {
    let mut out = Vec::new();
    for term in s.split([',', ' ', '\t']).filter(|t| !t.is_empty()) {
        let (coef, pat) = term.split_once(':').ok_or_else(|| {
            Error::Input(format!(
                "model term '{term}' is not of the form coef:pattern (e.g. -2:2*3)"
            ))
        })?;
        let coef: f64 = coef
            .parse()
            .map_err(|_| Error::Input(format!("bad coefficient '{coef}' in '{term}'")))?;
        out.push((coef, pat.parse()?));
    }
    Ok(out)
}

/// Draws a dataset.  Column entries are sampled column-by-column and noise
/// row-by-row, so outputs are a pure function of the configuration.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    if cfg.n < 2 {
        return Err(Error::Input(format!("need at least 2 rows, got {}", cfg.n)));
    }
    if cfg.m == 0 {
        return Err(Error::Input("need at least 1 base column".into()));
    }
    if !(0.0..1.0).contains(&cfg.zeta) {
        return Err(Error::Input(format!(
            "zeta must lie in [0, 1), got {}",
            cfg.zeta
        )));
    }
    if !(cfg.sigma > 0.0 && cfg.sigma.is_finite()) {
        return Err(Error::Input(format!(
            "sigma must be positive and finite, got {}",
            cfg.sigma
        )));
    }
    for (_, pat) in &cfg.model {
        if pat.max_index() > cfg.m {
            return Err(Error::Input(format!(
                "model pattern {pat} uses a column beyond m = {}",
                cfg.m
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cols: Vec<Vec<f64>> = (0..cfg.m)
        .map(|_| {
            (0..cfg.n)
                .map(|_| if rng.gen::<f64>() < cfg.zeta { 0.0 } else { 1.0 })
                .collect()
        })
        .collect();
    let y: Vec<f64> = (0..cfg.n)
        .map(|i| {
            let mu: f64 = cfg
                .model
                .iter()
                .map(|(coef, pat)| {
                    coef
                        * pat
                            .indices()
                            .iter()
                            .map(|&j| cols[(j - 1) as usize][i])
                            .product::<f64>()
                })
                .sum();
            let noise: f64 = StandardNormal.sample(&mut rng);
            mu + cfg.sigma * noise
        })
        .collect();
    Dataset::new(cols, y, cfg.sigma * cfg.sigma)
}
