//! Descriptive statistics and correlation.

use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Variable};
use super::FitError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std: f64,
    pub min: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub max: f64,
}

impl Summary {
    pub fn as_array(&self) -> [f64; 7] {
        [self.mean, self.std, self.min, self.q25, self.q50, self.q75, self.max]
    }
}

pub const SUMMARY_ROWS: [&str; 7] = ["mean", "std", "min", "25%", "50%", "75%", "max"];

/// Quantile of sorted data by linear interpolation between order
/// statistics at position `q·(n − 1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn summarize(values: &[f64]) -> Result<Summary, FitError> {
    if values.len() < 2 {
        return Err(FitError::NotEnoughRecords {
            needed: 2,
            got: values.len(),
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        mean,
        std: var.sqrt(),
        min: sorted[0],
        q25: quantile_sorted(&sorted, 0.25),
        q50: quantile_sorted(&sorted, 0.5),
        q75: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

/// Per-variable summaries in schema order.
pub fn describe(ds: &Dataset) -> Result<Vec<(Variable, Summary)>, FitError> {
    Variable::ALL
        .iter()
        .map(|&v| summarize(&ds.column(v)).map(|s| (v, s)))
        .collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// 9×9 Pearson correlation matrix in schema order.
pub fn correlation_matrix(ds: &Dataset) -> Result<[[f64; 9]; 9], FitError> {
    if ds.len() < 2 {
        return Err(FitError::NotEnoughRecords {
            needed: 2,
            got: ds.len(),
        });
    }
    let cols: Vec<Vec<f64>> = Variable::ALL.iter().map(|&v| ds.column(v)).collect();
    for (v, c) in Variable::ALL.iter().zip(&cols) {
        if c.iter().all(|x| *x == c[0]) {
            return Err(FitError::ZeroVariance(*v));
        }
    }
    let mut m = [[0.0; 9]; 9];
    for i in 0..9 {
        m[i][i] = 1.0;
        for j in (i + 1)..9 {
            let r = pearson(&cols[i], &cols[j]);
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    Ok(m)
}
