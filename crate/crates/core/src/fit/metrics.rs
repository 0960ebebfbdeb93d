use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("predictions ({predictions}) and truths ({truths}) differ in length")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("no samples")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
}

impl Metrics {
    pub fn rmse(&self) -> f64 {
        self.mse.sqrt()
    }
}

pub fn metrics(predictions: &[f64], truths: &[f64]) -> Result<Metrics, MetricsError> {
    if predictions.len() != truths.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    if truths.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = truths.len() as f64;
    let (sq, abs) = predictions
        .iter()
        .zip(truths)
        .fold((0.0, 0.0), |(sq, abs), (p, t)| {
            let e = p - t;
            (sq + e * e, abs + e.abs())
        });
    Ok(Metrics {
        mse: sq / n,
        mae: abs / n,
    })
}
