//! Fitted model artifacts and the model file format.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::{ExperimentRecord, Variable};
use super::mlp::Mlp;
use super::poly::Polynomial;
use super::tree::RegressionTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Model {
    Polynomial(Polynomial),
    Tree(RegressionTree),
    Mlp(Mlp),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Polynomial(_) => "polynomial",
            Model::Tree(_) => "tree",
            Model::Mlp(_) => "mlp",
        }
    }
}

/// Provenance of a fitted model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub hyperparameters: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv_mse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training_rows: Option<usize>,
}

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("predictor expects {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("invalid model file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("inconsistent model: {0}")]
    Inconsistent(String),
}

/// A model of one variable from a fixed list of others, in operator units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictor {
    pub inputs: Vec<Variable>,
    pub output: Variable,
    pub model: Model,
    #[serde(default)]
    pub metadata: TrainingMetadata,
}

impl Predictor {
    pub fn new(inputs: Vec<Variable>, output: Variable, model: Model) -> Self {
        Self {
            inputs,
            output,
            model,
            metadata: TrainingMetadata::default(),
        }
    }

    /// Evaluates with inputs in the order of [`Predictor::inputs`].
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, PredictorError> {
        if x.len() != self.inputs.len() {
            return Err(PredictorError::Arity {
                expected: self.inputs.len(),
                got: x.len(),
            });
        }
        Ok(self.evaluate_unchecked(x))
    }

    fn evaluate_unchecked(&self, x: &[f64]) -> f64 {
        match &self.model {
            Model::Polynomial(p) => p.evaluate(x),
            Model::Tree(t) => t.evaluate(x),
            Model::Mlp(m) => m.evaluate(x),
        }
    }

    pub fn evaluate_record(&self, r: &ExperimentRecord) -> f64 {
        let x: Vec<f64> = self.inputs.iter().map(|&v| r.get(v)).collect();
        self.evaluate_unchecked(&x)
    }

    /// Evaluates with inputs looked up by variable.
    pub fn evaluate_with(&self, lookup: impl Fn(Variable) -> f64) -> f64 {
        let x: Vec<f64> = self.inputs.iter().map(|&v| lookup(v)).collect();
        self.evaluate_unchecked(&x)
    }

    /// Structural checks on a loaded model.
    pub fn validate(&self) -> Result<(), PredictorError> {
        let n = self.inputs.len();
        let bad = |m: String| Err(PredictorError::Inconsistent(m));
        match &self.model {
            Model::Polynomial(p) => {
                for (k, t) in p.terms.iter().enumerate() {
                    if t.powers.len() != n {
                        return bad(format!("term {k} has {} exponents for {n} inputs", t.powers.len()));
                    }
                    if !t.coefficient.is_finite() {
                        return bad(format!("term {k} coefficient is not finite"));
                    }
                }
            }
            Model::Tree(t) => {
                if t.nodes.is_empty() {
                    return bad("tree has no nodes".into());
                }
                for (k, node) in t.nodes.iter().enumerate() {
                    if let super::tree::TreeNode::Split {
                        feature,
                        left,
                        right,
                        ..
                    } = node
                    {
                        if *feature >= n || *left <= k || *right <= k || *left >= t.nodes.len() || *right >= t.nodes.len() {
                            return bad(format!("tree node {k} has invalid links"));
                        }
                    }
                }
            }
            Model::Mlp(m) => {
                let mut width = n;
                for (k, l) in m.layers.iter().enumerate() {
                    if l.n_in != width || l.weights.len() != l.n_in * l.n_out || l.biases.len() != l.n_out {
                        return bad(format!("layer {k} dimensions do not chain"));
                    }
                    width = l.n_out;
                }
                if width != 1 || m.input_scaler.mean.len() != n || m.input_scaler.std.len() != n {
                    return bad("network output or scaler dimensions are wrong".into());
                }
            }
        }
        Ok(())
    }

    pub fn to_writer<W: Write>(&self, w: W) -> Result<(), PredictorError> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Self, PredictorError> {
        let p: Predictor = serde_json::from_reader(r)?;
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), PredictorError> {
        let file = std::fs::File::create(path)?;
        self.to_writer(std::io::BufWriter::new(file))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PredictorError> {
        Self::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Published nozzle temperature polynomial over (T_TS, T_w, T_a).
    pub fn nozzle_temperature_polynomial() -> Self {
        let poly = Polynomial::from_terms(&[
            (-79.5664, &[0, 0, 0]),
            (1.4220, &[1, 0, 0]),
            (3.6303, &[0, 1, 0]),
            (-1.8113, &[0, 0, 1]),
        ]);
        Self::new(
            vec![Variable::TTs, Variable::Tw, Variable::Ta],
            Variable::Tn,
            Model::Polynomial(poly),
        )
    }

    /// Published MVD polynomial in which every term but the constant
    /// carries Q_a. Inputs (Q_a, LWC, T_TS, v_TS).
    pub fn mvd_factor_polynomial() -> Self {
        // exponents over (Q_a, LWC, T_TS, v_TS)
        let poly = Polynomial::from_terms(&[
            (44.3881, &[0, 0, 0, 0]),
            (-0.6299, &[1, 0, 0, 0]),
            (0.0178, &[1, 0, 0, 1]),
            (0.0257, &[1, 0, 1, 0]),
            (-0.1530, &[1, 1, 0, 0]),
            (0.0012, &[1, 0, 1, 1]),
            (-0.0035, &[1, 1, 0, 1]),
            (-0.0546, &[1, 1, 1, 0]),
            (0.0003, &[1, 1, 1, 1]),
        ]);
        Self::new(mvd_inputs(), Variable::Mvd, Model::Polynomial(poly))
    }

    /// Published 15-term MVD polynomial without intercept. Inputs
    /// (Q_a, LWC, T_TS, v_TS).
    pub fn mvd_full_polynomial() -> Self {
        let poly = Polynomial::from_terms(&[
            (-7.6323, &[0, 0, 1, 0]),
            (0.8825, &[0, 0, 0, 1]),
            (8.8270, &[0, 1, 0, 0]),
            (4.4380, &[1, 0, 0, 0]),
            (0.1419, &[0, 0, 1, 1]),
            (0.4914, &[0, 1, 1, 0]),
            (-0.1066, &[0, 1, 0, 1]),
            (0.8393, &[1, 0, 1, 0]),
            (-0.0812, &[1, 0, 0, 1]),
            (-0.9817, &[1, 1, 0, 0]),
            (0.0189, &[0, 1, 1, 1]),
            (-0.0141, &[1, 0, 1, 1]),
            (-0.111, &[1, 1, 1, 0]),
            (-0.0037, &[1, 1, 0, 1]),
            (-0.0023, &[1, 1, 1, 1]),
        ]);
        Self::new(mvd_inputs(), Variable::Mvd, Model::Polynomial(poly))
    }
}

pub fn mvd_inputs() -> Vec<Variable> {
    vec![Variable::Qa, Variable::Lwc, Variable::TTs, Variable::VTs]
}
