use crate::error::Error;
use crate::Result;

/// A regression problem: an n x m design with entries in [0, 1], a response
/// vector, and the (known) noise variance of the response.
///
/// Columns are stored contiguously because every path and search in this
/// crate works column-wise: interaction columns are built by elementwise
/// products of the stored columns.
#[derive(Debug, Clone)]
pub struct Dataset {
    n: usize,
    m: u32,
    cols: Vec<Vec<f64>>,
    y: Vec<f64>,
    sigma2: f64,
    names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from design columns, response, and noise variance.
    ///
    /// Every design entry must lie in [0, 1] (the branch-and-bound bounds used
    /// throughout rely on non-negative columns that shrink under products).
    pub fn new(cols: Vec<Vec<f64>>, y: Vec<f64>, sigma2: f64) -> Result<Self> {
        let names = (1..=cols.len()).map(|j| format!("z{j}")).collect();
        Self::with_names(cols, y, sigma2, names)
    }

    /// As [`Dataset::new`], with explicit column names (used by CSV IO).
    pub fn with_names(
        cols: Vec<Vec<f64>>,
        y: Vec<f64>,
        sigma2: f64,
        names: Vec<String>,
    ) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::Input("design has no columns".into()));
        }
        let n = y.len();
        if n < 2 {
            return Err(Error::Input(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        if names.len() != cols.len() {
            return Err(Error::Input(format!(
                "{} column names for {} columns",
                names.len(),
                cols.len()
            )));
        }
        for (j, col) in cols.iter().enumerate() {
            if col.len() != n {
                return Err(Error::Input(format!(
                    "column {} has {} rows, response has {n}",
                    j + 1,
                    col.len()
                )));
            }
            for (i, &v) in col.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Input(format!(
                        "design entry at row {}, column {} is {v}, outside [0, 1]",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::Input("response contains non-finite values".into()));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::Input(format!(
                "noise variance must be positive and finite, got {sigma2}"
            )));
        }
        let m = u32::try_from(cols.len())
            .map_err(|_| Error::Input("too many columns".into()))?;
        Ok(Dataset {
            n,
            m,
            cols,
            y,
            sigma2,
            names,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of base features.
    pub fn m(&self) -> u32 {
        self.m
    }

    /// Base column `j` (1-based, matching pattern indices).
    pub fn col(&self, j: u32) -> &[f64] {
        &self.cols[(j - 1) as usize]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Restriction of the dataset to a subset of rows (used by data splitting).
    pub fn subset_rows(&self, rows: &[usize]) -> Result<Self> {
        let cols = self
            .cols
            .iter()
            .map(|c| rows.iter().map(|&i| c[i]).collect())
            .collect();
        let y = rows.iter().map(|&i| self.y[i]).collect();
        Dataset::with_names(cols, y, self.sigma2, self.names.clone())
    }
}
