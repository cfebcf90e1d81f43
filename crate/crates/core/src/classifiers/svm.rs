//! Linear SVM by deterministic full-batch subgradient descent.
//!
//! Objective: `|w|^2 / (2 C n) + mean_i max(0, 1 - y_i (w.x_i + b))` with
//! `y_i` in {-1, +1}. This has the same minimiser as the textbook
//! `|w|^2 / 2 + C * sum hinge` but keeps step sizes independent of `n`.
//! The iterate with the lowest objective is returned.

use serde::{Deserialize, Serialize};

use super::{check_training_data, dot, TrainingMeta};
use crate::error::{Error, Result};
use crate::types::Label;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            lr: 0.1,
            epochs: 2000,
            seed: 0,
        }
    }
}

pub fn signed(label: Label) -> f64 {
    if label.is_positive() {
        1.0
    } else {
        -1.0
    }
}

pub fn hinge_loss(weights: &[f64], bias: f64, x: &[Vec<f64>], y: &[Label]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(xi, &yi)| (1.0 - signed(yi) * (dot(weights, xi) + bias)).max(0.0))
        .sum::<f64>()
        / x.len() as f64
}

pub fn svm_objective(weights: &[f64], bias: f64, x: &[Vec<f64>], y: &[Label], c: f64) -> f64 {
    dot(weights, weights) / (2.0 * c * x.len() as f64) + hinge_loss(weights, bias, x, y)
}

/// A subgradient of [`svm_objective`]; exact gradient away from margin = 1.
pub fn svm_subgradient(weights: &[f64], bias: f64, x: &[Vec<f64>], y: &[Label], c: f64) -> (Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut gw: Vec<f64> = weights.iter().map(|w| w / (c * n)).collect();
    let mut gb = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let s = signed(yi);
        if s * (dot(weights, xi) + bias) < 1.0 {
            for (g, v) in gw.iter_mut().zip(xi) {
                *g -= s * v / n;
            }
            gb -= s / n;
        }
    }
    (gw, gb)
}

pub fn fit(x: &[Vec<f64>], y: &[Label], hp: &SvmParams) -> Result<(Vec<f64>, f64, TrainingMeta)> {
    let dim = check_training_data(x, y)?;
    if hp.c.is_nan() || hp.c <= 0.0 || hp.lr.is_nan() || hp.lr <= 0.0 {
        return Err(Error::Parameter("c and lr must be > 0".into()));
    }
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut best = (w.clone(), b, svm_objective(&w, b, x, y, hp.c));
    let mut trace = Vec::with_capacity(hp.epochs + 1);
    trace.push(best.2);
    for epoch in 0..hp.epochs {
        let (gw, gb) = svm_subgradient(&w, b, x, y, hp.c);
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= hp.lr * g;
        }
        b -= hp.lr * gb;
        let obj = svm_objective(&w, b, x, y, hp.c);
        if !obj.is_finite() {
            return Err(Error::Divergence {
                iteration: epoch + 1,
                loss: obj,
            });
        }
        trace.push(obj);
        if obj < best.2 {
            best = (w.clone(), b, obj);
        }
    }
    Ok((
        best.0,
        best.1,
        TrainingMeta {
            seed: hp.seed,
            iterations: hp.epochs,
            loss_trace: trace,
            n_train: x.len(),
        },
    ))
}
