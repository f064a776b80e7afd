use super::{dot, sigmoid, Scaler};
use crate::data::DatasetView;

fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

/// Summed log-loss plus `(n * l2 / 2) ||w||^2`; the bias is not penalized.
pub fn logistic_objective(train: &DatasetView<'_>, weights: &[f64], bias: f64, l2: f64) -> f64 {
    let n = train.len() as f64;
    let data: f64 = train
        .rows()
        .map(|(x, y)| {
            let s = dot(weights, x) + bias;
            softplus(s) - y * s
        })
        .sum();
    data + 0.5 * n * l2 * dot(weights, weights)
}

/// Gradient of [`logistic_objective`] as `(d/dw, d/db)`.
pub fn logistic_gradient(train: &DatasetView<'_>, weights: &[f64], bias: f64, l2: f64) -> (Vec<f64>, f64) {
    let n = train.len() as f64;
    let mut gw: Vec<f64> = weights.iter().map(|w| n * l2 * w).collect();
    let mut gb = 0.0;
    for (x, y) in train.rows() {
        let r = sigmoid(dot(weights, x) + bias) - y;
        for (g, xi) in gw.iter_mut().zip(x) {
            *g += r * xi;
        }
        gb += r;
    }
    (gw, gb)
}

pub(super) fn fit(
    train: &DatasetView<'_>,
    l2: f64,
    iterations: usize,
    step: f64,
    intercept: bool,
    scaler: Option<&Scaler>,
) -> (Vec<f64>, f64) {
    let p = train.dim();
    let n = train.len();
    // materialize scaled rows once
    let mut xs = Vec::with_capacity(n * p);
    let mut ys = Vec::with_capacity(n);
    for (x, y) in train.rows() {
        match scaler {
            Some(s) => xs.extend(s.apply(x)),
            None => xs.extend_from_slice(x),
        }
        ys.push(y);
    }
    let eta = step / n as f64;
    let mut w = vec![0.0; p];
    let mut b = 0.0;
    let mut gw = vec![0.0; p];
    for _ in 0..iterations {
        for (g, wi) in gw.iter_mut().zip(&w) {
            *g = n as f64 * l2 * wi;
        }
        let mut gb = 0.0;
        for (x, &y) in xs.chunks_exact(p).zip(&ys) {
            let r = sigmoid(dot(&w, x) + b) - y;
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += r * xi;
            }
            gb += r;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= eta * g;
        }
        if intercept {
            b -= eta * gb;
        }
    }
    (w, b)
}
