//! Data-driven side of the model: datasets, statistics, feature ranking
//! and the polynomial / tree / MLP fitting pipeline.

pub mod cv;
pub mod dataset;
pub mod metrics;
pub mod mlp;
pub mod poly;
pub mod predictor;
pub mod ranking;
pub mod reference;
pub mod stats;
pub mod synth;
pub mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use cv::{cross_validate, CvResult};
use dataset::{Dataset, Variable};
use metrics::{metrics, Metrics, MetricsError};
use mlp::{train_mlp, SearchSpace, TrainConfig};
use poly::{fit_polynomial_model, TermStructure};
use predictor::{Model, Predictor, TrainingMetadata};
use tree::{fit_tree_model, TreeParams};

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} records, got {got}")]
    NotEnoughRecords { needed: usize, got: usize },
    #[error("design matrix is rank deficient; dependent terms: [{}]", terms.join(", "))]
    RankDeficient { terms: Vec<String> },
    #[error("target {0} is constant")]
    ConstantTarget(Variable),
    #[error("column {0} has zero variance")]
    ZeroVariance(Variable),
    #[error("cannot build {k} folds from {n} records")]
    InvalidFolds { k: usize, n: usize },
    #[error("every MLP candidate diverged")]
    NoViableCandidate,
    #[error("training diverged (non-finite loss at epoch {epoch})")]
    Diverged { epoch: usize },
    #[error("target {0} is also listed as an input")]
    TargetAmongInputs(Variable),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Cross-validation settings shared by all model kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub folds: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { folds: 5, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    pub target: Variable,
    pub inputs: Vec<Variable>,
    pub rows: usize,
    pub in_sample: Metrics,
    /// Absent when the dataset has fewer rows than folds.
    pub cv: Option<CvResult>,
    pub hyperparameters: serde_json::Value,
    pub seed: u64,
}

impl FitReport {
    /// MAE ≤ RMSE must hold for the in-sample errors and for every fold.
    pub fn mae_within_rmse(&self) -> bool {
        let ok = |mae: f64, mse: f64| mae <= mse.sqrt() * (1.0 + 1e-12) + 1e-300;
        ok(self.in_sample.mae, self.in_sample.mse)
            && self.cv.as_ref().is_none_or(|cv| {
                cv.fold_mae.iter().zip(&cv.fold_mse).all(|(a, s)| ok(*a, *s))
            })
    }
}

/// Inputs the published models use for a target; every other variable
/// otherwise.
pub fn default_inputs(target: Variable) -> Vec<Variable> {
    match target {
        Variable::Tn => vec![Variable::TTs, Variable::Tw, Variable::Ta],
        Variable::Mvd => predictor::mvd_inputs(),
        t => ranking::other_variables(t),
    }
}

fn check_inputs(inputs: &[Variable], target: Variable) -> Result<(), FitError> {
    if inputs.contains(&target) {
        return Err(FitError::TargetAmongInputs(target));
    }
    Ok(())
}

fn finish(
    ds: &Dataset,
    mut predictor: Predictor,
    cv: Option<CvResult>,
    hyperparameters: serde_json::Value,
    opts: &FitOptions,
) -> Result<(Predictor, FitReport), FitError> {
    let pred: Vec<f64> = ds.records.iter().map(|r| predictor.evaluate_record(r)).collect();
    let in_sample = metrics(&pred, &ds.column(predictor.output))?;
    predictor.metadata = TrainingMetadata {
        seed: Some(opts.seed),
        hyperparameters: hyperparameters.clone(),
        mse: Some(in_sample.mse),
        mae: Some(in_sample.mae),
        cv_mse: cv.as_ref().map(|c| c.mean_mse),
        training_rows: Some(ds.len()),
    };
    let report = FitReport {
        model: predictor.model.kind().to_owned(),
        target: predictor.output,
        inputs: predictor.inputs.clone(),
        rows: ds.len(),
        in_sample,
        cv,
        hyperparameters,
        seed: opts.seed,
    };
    debug_assert!(report.mae_within_rmse());
    Ok((predictor, report))
}

fn maybe_cv<F>(ds: &Dataset, target: Variable, opts: &FitOptions, fit: F) -> Result<Option<CvResult>, FitError>
where
    F: Fn(&Dataset) -> Result<Predictor, FitError>,
{
    if ds.len() < opts.folds {
        return Ok(None);
    }
    cross_validate(ds, target, opts.folds, opts.seed, fit).map(Some)
}

/// Least-squares polynomial fit with in-sample and k-fold scores.
pub fn fit_polynomial(
    ds: &Dataset,
    inputs: &[Variable],
    target: Variable,
    structure: &TermStructure,
    opts: &FitOptions,
) -> Result<(Predictor, FitReport), FitError> {
    check_inputs(inputs, target)?;
    let fit = |d: &Dataset| {
        fit_polynomial_model(d, inputs, target, structure)
            .map(|p| Predictor::new(inputs.to_vec(), target, Model::Polynomial(p)))
    };
    let predictor = fit(ds)?;
    let cv = maybe_cv(ds, target, opts, fit)?;
    finish(ds, predictor, cv, json!({ "structure": structure }), opts)
}

/// CART fit with in-sample and k-fold scores.
pub fn fit_tree(
    ds: &Dataset,
    inputs: &[Variable],
    target: Variable,
    params: TreeParams,
    opts: &FitOptions,
) -> Result<(Predictor, FitReport), FitError> {
    check_inputs(inputs, target)?;
    let needed = 2 * params.min_leaf.max(1);
    if ds.len() < needed {
        return Err(FitError::NotEnoughRecords { needed, got: ds.len() });
    }
    let fit = |d: &Dataset| {
        let t = fit_tree_model(&d.matrix(inputs), &d.column(target), params);
        Ok(Predictor::new(inputs.to_vec(), target, Model::Tree(t)))
    };
    let predictor = fit(ds)?;
    let cv = maybe_cv(ds, target, opts, fit)?;
    finish(
        ds,
        predictor,
        cv,
        json!({ "max_depth": params.max_depth, "min_leaf": params.min_leaf }),
        opts,
    )
}

/// Score of one grid-search candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub hidden: Vec<usize>,
    pub activation: mlp::Activation,
    /// `None` when training diverged.
    pub cv_mse: Option<f64>,
}

/// Grid search over network shapes, selected by mean k-fold MSE and
/// retrained on the full dataset.
pub fn fit_mlp(
    ds: &Dataset,
    inputs: &[Variable],
    target: Variable,
    space: &SearchSpace,
    train: &TrainConfig,
    opts: &FitOptions,
) -> Result<(Predictor, FitReport, Vec<CandidateScore>), FitError> {
    check_inputs(inputs, target)?;
    if ds.len() < 10 {
        return Err(FitError::NotEnoughRecords { needed: 10, got: ds.len() });
    }
    let train_on = |d: &Dataset, hidden: &[usize], act| {
        train_mlp(&d.matrix(inputs), &d.column(target), hidden, act, train)
            .map(|m| Predictor::new(inputs.to_vec(), target, Model::Mlp(m)))
            .map_err(|e| FitError::Diverged { epoch: e.epoch })
    };
    let candidates = space.candidates();
    let scores: Vec<CandidateScore> = candidates
        .par_iter()
        .map(|(hidden, act)| {
            let cv = cross_validate(ds, target, opts.folds.min(ds.len()), opts.seed, |d| {
                train_on(d, hidden, *act)
            });
            let cv_mse = match cv {
                Ok(c) if c.mean_mse.is_finite() => Some(c.mean_mse),
                Ok(_) | Err(FitError::Diverged { .. }) => {
                    log::warn!("rejected candidate {hidden:?} {act:?}: non-finite loss");
                    None
                }
                Err(e) => {
                    log::warn!("rejected candidate {hidden:?} {act:?}: {e}");
                    None
                }
            };
            CandidateScore {
                hidden: hidden.clone(),
                activation: *act,
                cv_mse,
            }
        })
        .collect();
    let best = scores
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.cv_mse.map(|m| (i, m)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .ok_or(FitError::NoViableCandidate)?;
    let (hidden, act) = &candidates[best.0];
    let predictor = train_on(ds, hidden, *act)?;
    let cv = maybe_cv(ds, target, opts, |d| train_on(d, hidden, *act))?;
    let hp = json!({
        "hidden": hidden,
        "activation": act,
        "epochs": train.epochs,
        "learning_rate": train.learning_rate,
        "optimizer": "adam",
        "train_seed": train.seed,
        "candidates": candidates.len(),
    });
    let (p, r) = finish(ds, predictor, cv, hp, opts)?;
    Ok((p, r, scores))
}
