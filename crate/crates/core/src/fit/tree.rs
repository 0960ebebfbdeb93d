//! CART regression trees.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        value: f64,
        samples: usize,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary tree stored as a flat node list with the root at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 4,
            min_leaf: 1,
        }
    }
}

impl RegressionTree {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &RegressionTree, i: usize) -> usize {
            match &t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }
}

/// Mean written as an offset from the first member so that a constant
/// group reproduces its value exactly.
pub fn leaf_mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mut it = values.clone();
    let Some(first) = it.next() else { return 0.0 };
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + (v - first), n + 1));
    first + sum / n as f64
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    y: &'a [f64],
    params: TreeParams,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let mean = leaf_mean(idx.iter().map(|&i| self.y[i]));
        let sse: f64 = idx.iter().map(|&i| (self.y[i] - mean).powi(2)).sum();
        let slot = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            value: mean,
            samples: idx.len(),
        });
        if depth >= self.params.max_depth
            || idx.len() < 2 * self.params.min_leaf.max(1)
            || sse <= 0.0
        {
            return slot;
        }
        let Some(best) = self.best_split(&idx, mean, sse) else {
            return slot;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.rows[i][best.feature] <= best.threshold);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[slot] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        slot
    }

    fn best_split(&self, idx: &[usize], mean: f64, sse: f64) -> Option<Split> {
        let n = idx.len();
        let min_leaf = self.params.min_leaf.max(1);
        let tol = 1e-12 * sse;
        let mut best: Option<Split> = None;
        let n_features = self.rows[idx[0]].len();
        for f in 0..n_features {
            let mut order = idx.to_vec();
            order.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]));
            // Centred prefix sums keep the SSE differences well conditioned.
            let total: f64 = order.iter().map(|&i| self.y[i] - mean).sum();
            let mut s = 0.0;
            for k in 1..n {
                s += self.y[order[k - 1]] - mean;
                let lo = self.rows[order[k - 1]][f];
                let hi = self.rows[order[k]][f];
                if lo == hi || k < min_leaf || n - k < min_leaf {
                    continue;
                }
                let (nl, nr) = (k as f64, (n - k) as f64);
                // Reduction in SSE from splitting: sL²/nL + sR²/nR − total²/n.
                let gain = s * s / nl + (total - s).powi(2) / nr - total * total / n as f64;
                let threshold = lo + (hi - lo) / 2.0;
                let better = match &best {
                    None => gain > tol,
                    Some(b) => gain > b.gain + tol,
                };
                if better {
                    best = Some(Split {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// Greedy CART fit minimising the weighted child SSE at each split.
pub fn fit_tree_model(rows: &[Vec<f64>], y: &[f64], params: TreeParams) -> RegressionTree {
    let mut b = Builder {
        rows,
        y,
        params,
        nodes: Vec::new(),
    };
    if !y.is_empty() {
        b.build((0..y.len()).collect(), 0);
    }
    RegressionTree { nodes: b.nodes }
}
