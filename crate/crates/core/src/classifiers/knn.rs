use serde::{Deserialize, Serialize};

use crate::embedding::cosine_similarity;
use crate::error::{Error, Result};
use crate::types::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

/// One labeled training point.
#[derive(Debug, Clone, Copy)]
pub struct LabeledPoint<'a> {
    pub id: &'a str,
    pub label: Label,
    pub vector: &'a [f64],
}

/// Majority label among the `k` nearest points by cosine distance, and the
/// fraction of those neighbours that are positive. Distance ties are broken
/// by ascending id.
pub fn knn_predict(train: &[LabeledPoint<'_>], query: &[f64], k: usize) -> Result<(Label, f64)> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::Parameter(format!("k must be odd and positive, got {k}")));
    }
    if k > train.len() {
        return Err(Error::Size(format!("k = {k} exceeds {} training points", train.len())));
    }
    let mut dists = Vec::with_capacity(train.len());
    for p in train {
        dists.push((1.0 - cosine_similarity(query, p.vector)?, p.id, p.label));
    }
    dists.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    let positives = dists[..k].iter().filter(|d| d.2.is_positive()).count();
    let score = positives as f64 / k as f64;
    Ok((Label::from_positive(positives * 2 > k), score))
}
