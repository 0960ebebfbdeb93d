//! Polynomial predictors and ordinary least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Variable};
use super::FitError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub coefficient: f64,
    /// Exponent of each input, aligned with the predictor's input list.
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub terms: Vec<PolyTerm>,
}

fn monomial(powers: &[u32], x: &[f64]) -> f64 {
    powers
        .iter()
        .zip(x)
        .fold(1.0, |acc, (&p, &xi)| if p == 0 { acc } else { acc * xi.powi(p as i32) })
}

impl Polynomial {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(0.0, |acc, t| acc + t.coefficient * monomial(&t.powers, x))
    }

    pub fn from_terms(terms: &[(f64, &[u32])]) -> Self {
        Self {
            terms: terms
                .iter()
                .map(|(c, p)| PolyTerm {
                    coefficient: *c,
                    powers: p.to_vec(),
                })
                .collect(),
        }
    }
}

/// Which monomials a polynomial fit uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TermStructure {
    /// Intercept plus one term per input.
    Linear,
    /// Every product of 1 to `max_order` distinct inputs, each to the first
    /// power, with an optional intercept.
    Interactions { max_order: usize, intercept: bool },
    /// Intercept plus the input at `factor` multiplied by every product of
    /// 0 to n−1 of the other inputs.
    FactorTimesInteractions { factor: usize },
    /// Explicit exponent tuples.
    Custom { powers: Vec<Vec<u32>> },
}

fn subsets_by_size(n: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for size in 1..=max_order.min(n) {
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            out.push(combo.clone());
            let mut i = size;
            while i > 0 && combo[i - 1] == n - size + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            combo[i - 1] += 1;
            for j in i..size {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    out
}

fn powers_of(subset: &[usize], n: usize) -> Vec<u32> {
    let mut p = vec![0; n];
    for &i in subset {
        p[i] = 1;
    }
    p
}

impl TermStructure {
    pub fn exponents(&self, n_inputs: usize) -> Vec<Vec<u32>> {
        match self {
            TermStructure::Linear => std::iter::once(vec![0; n_inputs])
                .chain((0..n_inputs).map(|i| powers_of(&[i], n_inputs)))
                .collect(),
            TermStructure::Interactions {
                max_order,
                intercept,
            } => {
                let mut out = Vec::new();
                if *intercept {
                    out.push(vec![0; n_inputs]);
                }
                out.extend(
                    subsets_by_size(n_inputs, *max_order)
                        .iter()
                        .map(|s| powers_of(s, n_inputs)),
                );
                out
            }
            TermStructure::FactorTimesInteractions { factor } => {
                let others: Vec<usize> = (0..n_inputs).filter(|i| i != factor).collect();
                let mut out = vec![vec![0; n_inputs], powers_of(&[*factor], n_inputs)];
                for s in subsets_by_size(others.len(), others.len()) {
                    let mut idx: Vec<usize> = s.iter().map(|&k| others[k]).collect();
                    idx.push(*factor);
                    out.push(powers_of(&idx, n_inputs));
                }
                out
            }
            TermStructure::Custom { powers } => powers.clone(),
        }
    }
}

/// Human-readable monomial name such as `Q_a·LWC`.
pub fn term_name(powers: &[u32], inputs: &[Variable]) -> String {
    let parts: Vec<String> = powers
        .iter()
        .zip(inputs)
        .filter(|(p, _)| **p > 0)
        .map(|(p, v)| if *p == 1 { v.name().to_owned() } else { format!("{}^{p}", v.name()) })
        .collect();
    if parts.is_empty() {
        "1".into()
    } else {
        parts.join("·")
    }
}

/// Relative size of a QR diagonal entry below which a column is treated as
/// linearly dependent on the preceding ones.
const RANK_TOLERANCE: f64 = 1e-10;

/// Least-squares coefficients for the given monomials via Householder QR
/// on the column-normalised design matrix.
pub fn least_squares(
    rows: &[Vec<f64>],
    targets: &[f64],
    exponents: &[Vec<u32>],
    inputs: &[Variable],
) -> Result<Vec<f64>, FitError> {
    let n = rows.len();
    let p = exponents.len();
    if n < p {
        return Err(FitError::NotEnoughRecords { needed: p, got: n });
    }
    let mut x = DMatrix::<f64>::zeros(n, p);
    for (i, row) in rows.iter().enumerate() {
        for (j, e) in exponents.iter().enumerate() {
            x[(i, j)] = monomial(e, row);
        }
    }
    let scales: Vec<f64> = (0..p)
        .map(|j| {
            let norm = x.column(j).norm();
            if norm > 0.0 {
                norm
            } else {
                1.0
            }
        })
        .collect();
    for (j, s) in scales.iter().enumerate() {
        x.column_mut(j).unscale_mut(*s);
    }
    let qr = x.qr();
    let r = qr.r();
    let dependent: Vec<String> = (0..p)
        .filter(|&j| r[(j, j)].abs() < RANK_TOLERANCE)
        .map(|j| term_name(&exponents[j], inputs))
        .collect();
    if !dependent.is_empty() {
        return Err(FitError::RankDeficient { terms: dependent });
    }
    let y = DVector::from_column_slice(targets);
    let qty = qr.q().transpose() * y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| FitError::RankDeficient { terms: vec![] })?;
    Ok(beta.iter().zip(&scales).map(|(b, s)| b / s).collect())
}

pub fn fit_polynomial_model(
    ds: &Dataset,
    inputs: &[Variable],
    target: Variable,
    structure: &TermStructure,
) -> Result<Polynomial, FitError> {
    let exponents = structure.exponents(inputs.len());
    let rows = ds.matrix(inputs);
    let y = ds.column(target);
    let beta = least_squares(&rows, &y, &exponents, inputs)?;
    Ok(Polynomial {
        terms: beta
            .into_iter()
            .zip(exponents)
            .map(|(coefficient, powers)| PolyTerm {
                coefficient,
                powers,
            })
            .collect(),
    })
}
