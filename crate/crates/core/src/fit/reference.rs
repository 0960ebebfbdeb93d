//! Published summary statistics of the original 30 experiments and the
//! error figures reported for the fitted models. Column order follows
//! [`Variable::ALL`](super::dataset::Variable::ALL).

/// Rows: mean, std, min, 25 %, 50 %, 75 %, max.
pub const SUMMARY: [[f64; 9]; 7] = [
    [-6.5, 70.4, 70.7, 38.7, 34.2, 1.4, 32.7, 23.7, 9.0],
    [2.9, 1.0, 1.8, 10.1, 12.3, 0.9, 9.7, 17.6, 2.8],
    [-15.0, 67.0, 68.0, 24.0, 25.0, 0.3, 16.9, 10.0, 4.5],
    [-7.6, 70.0, 70.0, 31.6, 25.0, 0.6, 25.4, 10.0, 8.1],
    [-6.0, 70.1, 70.0, 37.8, 25.0, 1.0, 30.9, 15.0, 8.1],
    [-5.0, 71.0, 70.0, 42.0, 50.0, 2.5, 42.8, 30.0, 11.2],
    [-1.2, 73.0, 74.0, 70.0, 50.0, 2.5, 48.8, 55.0, 13.5],
];

pub const MEAN: usize = 0;
pub const STD: usize = 1;
pub const MIN: usize = 2;
pub const Q25: usize = 3;
pub const Q50: usize = 4;
pub const Q75: usize = 5;
pub const MAX: usize = 6;

pub const CORRELATION: [[f64; 9]; 9] = [
    [1.00, -0.18, -0.05, 0.36, -0.16, 0.39, -0.11, 0.19, 0.25],
    [-0.18, 1.00, 0.24, 0.23, -0.04, 0.20, 0.08, -0.20, 0.09],
    [-0.05, 0.24, 1.00, -0.25, 0.23, 0.03, 0.24, -0.33, 0.03],
    [0.36, 0.23, -0.25, 1.00, -0.01, 0.48, 0.08, -0.07, 0.47],
    [-0.16, -0.04, 0.23, -0.01, 1.00, -0.06, -0.16, 0.18, 0.35],
    [0.39, 0.20, 0.03, 0.48, -0.06, 1.00, -0.10, -0.01, 0.75],
    [-0.11, 0.08, 0.24, 0.08, -0.16, -0.10, 1.00, -0.83, -0.03],
    [0.19, -0.20, -0.33, -0.07, 0.18, -0.01, -0.83, 1.00, 0.02],
    [0.25, 0.09, 0.03, 0.47, 0.35, 0.75, -0.03, 0.02, 1.00],
];

/// (model, MSE, MAE) reported for the nozzle temperature models.
pub const NOZZLE_TEMPERATURE_MODELS: [(&str, f64, f64); 3] = [
    ("polynomial", 66.70, 6.20),
    ("regression tree", 10.68, 2.03),
    ("neural network", 9.57, 1.97),
];

/// (model, MSE, MAE) reported for the MVD models.
pub const MVD_MODELS: [(&str, f64, f64); 4] = [
    ("polynomial, Q_a factor form", 20.70, 3.71),
    ("polynomial, full interactions", 17.47, 2.84),
    ("regression tree", 16.50, 3.10),
    ("neural network", 16.79, 3.11),
];

/// Hidden layer sizes and activation of the published networks.
pub const NOZZLE_TEMPERATURE_NETWORK: (&[usize], &str) = (&[10, 4], "sigmoid");
pub const MVD_NETWORK: (&[usize], &str) = (&[2, 7], "relu");

/// Rounding tolerance for comparing a dataset against the published tables.
pub const PRINTED_TOLERANCE: f64 = 0.05;
