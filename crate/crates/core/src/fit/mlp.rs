//! Multilayer perceptron regressor with standardised inputs and target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Sigmoid, Activation::Tanh, Activation::Relu];

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `n_out × n_in`.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            biases: vec![0.0; n_out],
        }
    }

    fn forward(&self, a: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.n_out {
            let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
            out.push(self.biases[o] + row.iter().zip(a).map(|(w, x)| w * x).sum::<f64>());
        }
    }
}

/// Affine standardisation `(x − mean)/std` applied per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn identity(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            std: vec![1.0; n],
        }
    }

    pub fn fit(columns: &[Vec<f64>]) -> Self {
        let (mean, std) = columns
            .iter()
            .map(|c| {
                let n = c.len().max(1) as f64;
                let m = c.iter().sum::<f64>() / n;
                let s = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
                (m, if s > 0.0 { s } else { 1.0 })
            })
            .unzip();
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub activation: Activation,
    /// Hidden layers followed by a single linear output unit.
    pub layers: Vec<Dense>,
    pub input_scaler: Scaler,
    pub output_mean: f64,
    pub output_std: f64,
}

/// Full-batch Adam settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1500,
            learning_rate: 0.01,
            seed: 42,
        }
    }
}

impl Mlp {
    /// Network with every weight and bias at zero and identity scaling.
    pub fn zeros(n_inputs: usize, hidden: &[usize], activation: Activation) -> Self {
        let mut layers = Vec::new();
        let mut n_in = n_inputs;
        for &h in hidden.iter().chain(std::iter::once(&1)) {
            layers.push(Dense::zeros(n_in, h));
            n_in = h;
        }
        Self {
            activation,
            layers,
            input_scaler: Scaler::identity(n_inputs),
            output_mean: 0.0,
            output_std: 1.0,
        }
    }

    /// Glorot-uniform weights for sigmoid/tanh, He-normal for ReLU.
    pub fn random(n_inputs: usize, hidden: &[usize], activation: Activation, rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(n_inputs, hidden, activation);
        let last = net.layers.len() - 1;
        for (k, layer) in net.layers.iter_mut().enumerate() {
            let (fan_in, fan_out) = (layer.n_in as f64, layer.n_out as f64);
            if activation == Activation::Relu && k != last {
                let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
                layer.weights.iter_mut().for_each(|w| *w = normal.sample(rng));
                layer.biases.iter_mut().for_each(|b| *b = 0.1);
            } else {
                let limit = (6.0 / (fan_in + fan_out)).sqrt();
                let uniform = Uniform::new(-limit, limit).expect("non-empty range");
                layer.weights.iter_mut().for_each(|w| *w = uniform.sample(rng));
            }
        }
        net
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.n_out).collect()
    }

    /// Forward pass in standardised space.
    fn forward_std(&self, x: &[f64]) -> f64 {
        let mut a = x.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            layer.forward(&a, &mut z);
            if k == last {
                return z[0];
            }
            a.clear();
            a.extend(z.iter().map(|&v| self.activation.apply(v)));
        }
        unreachable!("network has an output layer")
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let xs: Vec<f64> = x
            .iter()
            .zip(self.input_scaler.mean.iter().zip(&self.input_scaler.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        self.output_mean + self.output_std * self.forward_std(&xs)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.biases);
        }
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) {
        let mut k = 0;
        for l in self.layers.iter_mut() {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[k..k + nw]);
            k += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&p[k..k + nb]);
            k += nb;
        }
    }

    /// Mean squared error over standardised samples, and its gradient with
    /// respect to [`Mlp::parameters`].
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[f64]) -> (f64, Vec<f64>) {
        let n = ys.len() as f64;
        let mut grad = vec![0.0; self.parameter_count()];
        let mut loss = 0.0;
        let depth = self.layers.len();
        let mut acts: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
        let mut pre: Vec<Vec<f64>> = vec![Vec::new(); depth];
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |k, l| {
                let start = *k;
                *k += l.weights.len() + l.biases.len();
                Some(start)
            })
            .collect();
        for (x, &y) in xs.iter().zip(ys) {
            acts[0].clone_from(x);
            for (k, layer) in self.layers.iter().enumerate() {
                let (head, tail) = acts.split_at_mut(k + 1);
                layer.forward(&head[k], &mut pre[k]);
                tail[0].clear();
                if k + 1 == depth {
                    tail[0].extend_from_slice(&pre[k]);
                } else {
                    tail[0].extend(pre[k].iter().map(|&z| self.activation.apply(z)));
                }
            }
            let err = acts[depth][0] - y;
            loss += err * err / n;
            let mut delta = vec![2.0 * err / n];
            for k in (0..depth).rev() {
                let layer = &self.layers[k];
                let off = offsets[k];
                let a_prev = &acts[k];
                for o in 0..layer.n_out {
                    for i in 0..layer.n_in {
                        grad[off + o * layer.n_in + i] += delta[o] * a_prev[i];
                    }
                    grad[off + layer.weights.len() + o] += delta[o];
                }
                if k == 0 {
                    break;
                }
                let mut next = vec![0.0; layer.n_in];
                for (i, slot) in next.iter_mut().enumerate() {
                    let back: f64 = (0..layer.n_out)
                        .map(|o| layer.weights[o * layer.n_in + i] * delta[o])
                        .sum();
                    *slot = back * self.activation.derivative(pre[k - 1][i], acts[k][i]);
                }
                delta = next;
            }
        }
        (loss, grad)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonFiniteLoss {
    pub epoch: usize,
}

/// Trains a network on raw rows. Inputs and target are standardised with
/// statistics of the training rows, which are stored in the returned model.
pub fn train_mlp(
    rows: &[Vec<f64>],
    y: &[f64],
    hidden: &[usize],
    activation: Activation,
    cfg: &TrainConfig,
) -> Result<Mlp, NonFiniteLoss> {
    let n_inputs = rows.first().map_or(0, |r| r.len());
    let columns: Vec<Vec<f64>> = (0..n_inputs).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let scaler = Scaler::fit(&columns);
    let target = Scaler::fit(&[y.to_vec()]);
    let xs: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(scaler.mean.iter().zip(&scaler.std))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        })
        .collect();
    let ys: Vec<f64> = y.iter().map(|v| (v - target.mean[0]) / target.std[0]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = Mlp::random(n_inputs, hidden, activation, &mut rng);
    net.input_scaler = scaler;
    net.output_mean = target.mean[0];
    net.output_std = target.std[0];

    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut params = net.parameters();
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    for epoch in 0..cfg.epochs {
        let (loss, grad) = net.loss_and_gradient(&xs, &ys);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(NonFiniteLoss { epoch });
        }
        let t = (epoch + 1) as i32;
        let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
        for ((p, g), (mi, vi)) in params.iter_mut().zip(&grad).zip(m.iter_mut().zip(v.iter_mut())) {
            *mi = b1 * *mi + (1.0 - b1) * g;
            *vi = b2 * *vi + (1.0 - b2) * g * g;
            *p -= cfg.learning_rate * (*mi / c1) / ((*vi / c2).sqrt() + eps);
        }
        net.set_parameters(&params);
    }
    Ok(net)
}

/// Architectures and activations explored by the grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub hidden_layers: Vec<usize>,
    pub neurons: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl SearchSpace {
    /// 1–3 hidden layers of 2–10 neurons, sigmoid/tanh/ReLU.
    pub fn full() -> Self {
        Self {
            hidden_layers: vec![1, 2, 3],
            neurons: (2..=10).collect(),
            activations: Activation::ALL.to_vec(),
        }
    }

    /// Same depths and activations on a thinned neuron grid.
    pub fn coarse() -> Self {
        Self {
            neurons: vec![2, 4, 7, 10],
            ..Self::full()
        }
    }

    /// Every (hidden sizes, activation) pair, depth-major.
    pub fn candidates(&self) -> Vec<(Vec<usize>, Activation)> {
        let mut archs: Vec<Vec<usize>> = Vec::new();
        for &depth in &self.hidden_layers {
            let mut level: Vec<Vec<usize>> = vec![vec![]];
            for _ in 0..depth {
                level = level
                    .into_iter()
                    .flat_map(|prefix| {
                        self.neurons.iter().map(move |&n| {
                            let mut p = prefix.clone();
                            p.push(n);
                            p
                        })
                    })
                    .collect();
            }
            archs.extend(level);
        }
        archs
            .into_iter()
            .flat_map(|a| self.activations.iter().map(move |&act| (a.clone(), act)))
            .collect()
    }
}
