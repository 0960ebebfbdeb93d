//! k-fold cross-validation with content-keyed fold assignment.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, ExperimentRecord, Variable};
use super::metrics::metrics;
use super::predictor::Predictor;
use super::FitError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub k: usize,
    pub seed: u64,
    pub fold_mse: Vec<f64>,
    pub fold_mae: Vec<f64>,
    pub mean_mse: f64,
    pub mean_mae: f64,
}

fn content_cmp(a: &ExperimentRecord, b: &ExperimentRecord) -> std::cmp::Ordering {
    a.to_array()
        .iter()
        .zip(b.to_array().iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Row indices of each fold. Rows are first put in a canonical order by
/// content and then shuffled with the seed, so the folds (as sets of
/// records) do not depend on the order rows arrive in. Indices within a
/// fold are listed in canonical order.
pub fn fold_indices(ds: &Dataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, FitError> {
    let n = ds.len();
    if k < 2 || k > n {
        return Err(FitError::InvalidFolds { k, n });
    }
    let mut canonical: Vec<usize> = (0..n).collect();
    canonical.sort_by(|&a, &b| content_cmp(&ds.records[a], &ds.records[b]));
    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold_of = vec![0usize; n];
    for (slot, &pos) in positions.iter().enumerate() {
        fold_of[pos] = slot % k;
    }
    let mut folds = vec![Vec::new(); k];
    for (pos, &row) in canonical.iter().enumerate() {
        folds[fold_of[pos]].push(row);
    }
    Ok(folds)
}

/// Fits on each k−1 folds and scores the held-out fold.
pub fn cross_validate<F>(
    ds: &Dataset,
    target: Variable,
    k: usize,
    seed: u64,
    fit: F,
) -> Result<CvResult, FitError>
where
    F: Fn(&Dataset) -> Result<Predictor, FitError>,
{
    let folds = fold_indices(ds, k, seed)?;
    let mut fold_mse = Vec::with_capacity(k);
    let mut fold_mae = Vec::with_capacity(k);
    for held in 0..k {
        let mut train_idx: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != held)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        train_idx.sort_by(|&a, &b| content_cmp(&ds.records[a], &ds.records[b]));
        let model = fit(&ds.subset(&train_idx))?;
        let test = ds.subset(&folds[held]);
        let pred: Vec<f64> = test.records.iter().map(|r| model.evaluate_record(r)).collect();
        let m = metrics(&pred, &test.column(target))?;
        fold_mse.push(m.mse);
        fold_mae.push(m.mae);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(CvResult {
        k,
        seed,
        mean_mse: mean(&fold_mse),
        mean_mae: mean(&fold_mae),
        fold_mse,
        fold_mae,
    })
}
