//! Feature ranking by mutual information and univariate F-statistic.

use statrs::function::gamma::ln_gamma;

use super::dataset::{Dataset, Variable};
use super::stats::pearson;
use super::FitError;

pub const MIN_RANKING_RECORDS: usize = 10;

/// Equal-frequency bin labels with ⌈√n⌉ bins. Tied values always share a
/// bin, so heavily tied columns end up with fewer bins.
pub fn equal_frequency_bins(values: &[f64]) -> (Vec<usize>, usize) {
    let n = values.len();
    let bins = (n as f64).sqrt().ceil().max(1.0) as usize;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut cuts: Vec<f64> = (1..bins).map(|i| sorted[i * n / bins]).collect();
    cuts.dedup();
    cuts.retain(|c| *c > sorted[0]);
    let labels = values
        .iter()
        .map(|x| cuts.partition_point(|c| c <= x))
        .collect();
    (labels, cuts.len() + 1)
}

struct Contingency {
    counts: Vec<Vec<usize>>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    n: usize,
}

fn contingency(x: &[f64], y: &[f64]) -> Contingency {
    let (lx, kx) = equal_frequency_bins(x);
    let (ly, ky) = equal_frequency_bins(y);
    let mut counts = vec![vec![0usize; ky]; kx];
    for (a, b) in lx.iter().zip(&ly) {
        counts[*a][*b] += 1;
    }
    let rows = counts.iter().map(|r| r.iter().sum()).collect();
    let cols = (0..ky).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
    Contingency {
        counts,
        rows,
        cols,
        n: x.len(),
    }
}

impl Contingency {
    fn plug_in(&self) -> f64 {
        let n = self.n as f64;
        let mut mi = 0.0;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                if c > 0 {
                    let c = c as f64;
                    mi += c / n * (n * c / (self.rows[i] as f64 * self.cols[j] as f64)).ln();
                }
            }
        }
        mi.max(0.0)
    }

    /// Expected plug-in MI under independence with these marginals
    /// (hypergeometric model of the cell counts).
    fn expected(&self) -> f64 {
        let n = self.n;
        let nf = n as f64;
        let lf = |k: usize| ln_gamma(k as f64 + 1.0);
        let mut emi = 0.0;
        for &a in &self.rows {
            for &b in &self.cols {
                let lo = (a + b).saturating_sub(n).max(1);
                let hi = a.min(b);
                let base = lf(a) + lf(b) + lf(n - a) + lf(n - b) - lf(n);
                for k in lo..=hi {
                    let kf = k as f64;
                    let log_p = base - lf(k) - lf(a - k) - lf(b - k) - lf(n + k - a - b);
                    emi += kf / nf * (nf * kf / (a as f64 * b as f64)).ln() * log_p.exp();
                }
            }
        }
        emi
    }
}

/// Plug-in mutual information of the binned pair, in nats.
pub fn mutual_information(x: &[f64], y: &[f64]) -> f64 {
    contingency(x, y).plug_in()
}

/// Plug-in MI minus its expectation under independence, floored at zero.
/// Unlike the raw plug-in estimate this is close to zero for unrelated
/// variables even when the bin count grows with n.
pub fn adjusted_mutual_information(x: &[f64], y: &[f64]) -> f64 {
    let c = contingency(x, y);
    (c.plug_in() - c.expected()).max(0.0)
}

/// Univariate regression F-statistic `(n−2)·r²/(1−r²)`. A constant
/// feature scores 0.
pub fn f_statistic(x: &[f64], y: &[f64]) -> f64 {
    if x.iter().all(|v| *v == x[0]) {
        return 0.0;
    }
    let r = pearson(x, y);
    let r2 = r * r;
    (x.len() as f64 - 2.0) * r2 / (1.0 - r2).max(f64::EPSILON)
}

fn check(ds: &Dataset, target: Variable) -> Result<Vec<f64>, FitError> {
    if ds.len() < MIN_RANKING_RECORDS {
        return Err(FitError::NotEnoughRecords {
            needed: MIN_RANKING_RECORDS,
            got: ds.len(),
        });
    }
    let y = ds.column(target);
    if y.iter().all(|v| *v == y[0]) {
        return Err(FitError::ConstantTarget(target));
    }
    Ok(y)
}

fn rank(mut scores: Vec<(Variable, f64)>) -> Vec<(Variable, f64)> {
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scores
}

/// All variables other than `target`, in schema order.
pub fn other_variables(target: Variable) -> Vec<Variable> {
    Variable::ALL.into_iter().filter(|v| *v != target).collect()
}

/// Features ranked by chance-adjusted mutual information with the target.
pub fn mutual_information_gain(
    ds: &Dataset,
    target: Variable,
    features: &[Variable],
) -> Result<Vec<(Variable, f64)>, FitError> {
    let y = check(ds, target)?;
    Ok(rank(
        features
            .iter()
            .map(|&f| (f, adjusted_mutual_information(&ds.column(f), &y)))
            .collect(),
    ))
}

/// Features ranked by univariate F-statistic against the target.
pub fn f_score(
    ds: &Dataset,
    target: Variable,
    features: &[Variable],
) -> Result<Vec<(Variable, f64)>, FitError> {
    let y = check(ds, target)?;
    Ok(rank(
        features
            .iter()
            .map(|&f| (f, f_statistic(&ds.column(f), &y)))
            .collect(),
    ))
}
