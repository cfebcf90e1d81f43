//! L2-regularised logistic regression by full-batch gradient descent.

use serde::{Deserialize, Serialize};

use super::{check_training_data, dot, sigmoid, TrainingMeta};
use crate::error::{Error, Result};
use crate::types::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrParams {
    pub l2: f64,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for LrParams {
    fn default() -> Self {
        Self {
            l2: 1e-3,
            lr: 0.1,
            epochs: 2000,
            seed: 0,
        }
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean logistic loss plus `l2 * |w|^2 / 2` (bias unregularised).
pub fn lr_objective(weights: &[f64], bias: f64, x: &[Vec<f64>], y: &[Label], l2: f64) -> f64 {
    let n = x.len() as f64;
    let data: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let z = dot(weights, xi) + bias;
            let t = if yi.is_positive() { 1.0 } else { 0.0 };
            softplus(z) - t * z
        })
        .sum::<f64>()
        / n;
    data + 0.5 * l2 * dot(weights, weights)
}

/// Analytic gradient of [`lr_objective`] with respect to (weights, bias).
pub fn lr_gradient(weights: &[f64], bias: f64, x: &[Vec<f64>], y: &[Label], l2: f64) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        let t = if yi.is_positive() { 1.0 } else { 0.0 };
        let r = sigmoid(dot(weights, xi) + bias) - t;
        for (g, v) in gw.iter_mut().zip(xi) {
            *g += r * v;
        }
        gb += r;
    }
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    (gw, gb / n)
}

/// Returns (weights, bias, meta). Starts from zero; deterministic.
pub fn fit(x: &[Vec<f64>], y: &[Label], hp: &LrParams) -> Result<(Vec<f64>, f64, TrainingMeta)> {
    let dim = check_training_data(x, y)?;
    if hp.lr.is_nan() || hp.lr <= 0.0 || hp.l2.is_nan() || hp.l2 < 0.0 {
        return Err(Error::Parameter("lr must be > 0 and l2 >= 0".into()));
    }
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut trace = Vec::with_capacity(hp.epochs + 1);
    let initial = lr_objective(&w, b, x, y, hp.l2);
    trace.push(initial);
    for epoch in 0..hp.epochs {
        let (gw, gb) = lr_gradient(&w, b, x, y, hp.l2);
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= hp.lr * g;
        }
        b -= hp.lr * gb;
        let loss = lr_objective(&w, b, x, y, hp.l2);
        if !loss.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                iteration: epoch + 1,
                loss,
            });
        }
        trace.push(loss);
    }
    Ok((
        w,
        b,
        TrainingMeta {
            seed: hp.seed,
            iterations: hp.epochs,
            loss_trace: trace,
            n_train: x.len(),
        },
    ))
}
