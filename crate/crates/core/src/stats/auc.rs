use super::{check_finite, midranks};
use crate::error::{Error, Result};

/// Probability that a random positive outscores a random negative, ties
/// counted as one half. Computed from midranks in O(n log n); for 0/1 scores
/// this is balanced accuracy.
pub fn rank_auc(pos_scores: &[f64], neg_scores: &[f64]) -> Result<f64> {
    if pos_scores.is_empty() || neg_scores.is_empty() {
        return Err(Error::Domain("rank AUC needs at least one score per class".into()));
    }
    check_finite("positive scores", pos_scores)?;
    check_finite("negative scores", neg_scores)?;
    let n_pos = pos_scores.len() as f64;
    let n_neg = neg_scores.len() as f64;
    let joined: Vec<f64> = pos_scores.iter().chain(neg_scores).copied().collect();
    let ranks = midranks(&joined);
    let rank_sum: f64 = ranks[..pos_scores.len()].iter().sum();
    let u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg))
}
