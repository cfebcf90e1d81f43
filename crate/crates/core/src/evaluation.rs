//! Cross-validated evaluation of the classical models and the metric
//! arithmetic shared with the LLM harness.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classifiers::{self, ModelSpec, DECISION_THRESHOLD};
use crate::error::{Error, Result};
use crate::stats::rank_auc;
use crate::store::Store;
use crate::types::Label;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `None` when nothing was predicted positive.
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn specificity(&self) -> Option<f64> {
        let d = self.tn + self.fp;
        (d > 0).then(|| self.tn as f64 / d as f64)
    }
}

/// Threshold scores (strictly greater is positive) and tally against labels.
pub fn compute_confusion(scores: &[f64], labels: &[Label], threshold: f64) -> Result<Confusion> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let mut c = Confusion::default();
    for (&s, l) in scores.iter().zip(labels) {
        match (s > threshold, l.is_positive()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Precision, recall, F1 and AUC for one evaluation unit (a CV fold or an
/// LLM run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub n: u64,
    pub confusion: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when the unit holds a single class.
    pub auc: Option<f64>,
    /// Set when no positives were predicted and precision was reported as 0.
    pub precision_undefined: bool,
}

impl Metrics {
    pub fn from_scores(scores: &[f64], labels: &[Label]) -> Result<Self> {
        let confusion = compute_confusion(scores, labels, DECISION_THRESHOLD)?;
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (&s, l) in scores.iter().zip(labels) {
            if l.is_positive() {
                pos.push(s);
            } else {
                neg.push(s);
            }
        }
        let auc = if pos.is_empty() || neg.is_empty() {
            None
        } else {
            Some(rank_auc(&pos, &neg)?)
        };
        let precision_undefined = confusion.precision().is_none();
        let precision = confusion.precision().unwrap_or(0.0);
        let recall = confusion.recall().unwrap_or(0.0);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Ok(Self {
            n: labels.len() as u64,
            confusion,
            precision,
            recall,
            f1,
            auc,
            precision_undefined,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when no unit had a defined AUC.
    pub auc: Option<f64>,
}

/// Arithmetic mean and sample standard deviation (n - 1; 0 for one unit).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and std of each metric across units.
pub fn summarize(units: &[Metrics]) -> (MetricSummary, MetricSummary) {
    let pick = |f: fn(&Metrics) -> f64| mean_std(&units.iter().map(f).collect::<Vec<_>>());
    let (p, ps) = pick(|m| m.precision);
    let (r, rs) = pick(|m| m.recall);
    let (f, fs) = pick(|m| m.f1);
    let aucs: Vec<f64> = units.iter().filter_map(|m| m.auc).collect();
    let (a, as_) = if aucs.is_empty() {
        (None, None)
    } else {
        let (a, s) = mean_std(&aucs);
        (Some(a), Some(s))
    };
    (
        MetricSummary {
            precision: p,
            recall: r,
            f1: f,
            auc: a,
        },
        MetricSummary {
            precision: ps,
            recall: rs,
            f1: fs,
            auc: as_,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model_id: String,
    pub split_id: String,
    pub embedding_fingerprint: String,
    pub spec: ModelSpec,
    pub folds: Vec<FoldMetrics>,
    pub mean: MetricSummary,
    pub std: MetricSummary,
    pub flags: Vec<String>,
    /// Unix seconds; only set when the caller supplies one, so reruns stay
    /// byte-identical by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<i64>,
}

impl MetricsReport {
    /// Markdown table with the columns Model, Precision, Recall, F1, AUC.
    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Model | Precision | Recall | F1 | AUC |\n|---|---|---|---|---|\n");
        let auc = self.mean.auc.map(|a| format!("{a:.3}")).unwrap_or_else(|| "n/a".into());
        let _ = writeln!(
            out,
            "| {} | {:.1}% | {:.1}% | {:.3} | {} |",
            self.model_id,
            self.mean.precision * 100.0,
            self.mean.recall * 100.0,
            self.mean.f1,
            auc
        );
        out
    }
}

/// Ids, feature rows and labels of a labeled design matrix.
pub type LabeledMatrix = (Vec<String>, Vec<Vec<f64>>, Vec<Label>);

/// Labeled rows with embeddings, in label order.
pub fn labeled_matrix(store: &Store) -> Result<LabeledMatrix> {
    let mut missing = Vec::new();
    let mut ids = Vec::new();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for s in store.labels() {
        match store.embedding(&s.post_id) {
            Some(v) => {
                ids.push(s.post_id.clone());
                x.push(v);
                y.push(s.label);
            }
            None => missing.push(s.post_id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Integrity(format!(
            "{} labeled samples lack embeddings: {}",
            missing.len(),
            missing.join(", ")
        )));
    }
    Ok((ids, x, y))
}

/// Train on k-1 folds, score the held-out fold, for every fold.
pub fn evaluate_cv(spec: &ModelSpec, store: &Store, split_id: &str) -> Result<MetricsReport> {
    let split = store.split(split_id)?;
    let (ids, x, y) = labeled_matrix(store)?;
    let fingerprint = store
        .embedding_header()
        .map(|h| h.fingerprint.clone())
        .ok_or_else(|| Error::Integrity("store has no embeddings".into()))?;
    let fold_of = split.fold_of();
    let folds: Vec<usize> = ids
        .iter()
        .map(|id| {
            fold_of
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::Integrity(format!("labeled sample {id} missing from split {split_id}")))
        })
        .collect::<Result<_>>()?;

    let results: Vec<Result<FoldMetrics>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..split.k)
            .map(|f| {
                let (ids, x, y, folds, fingerprint) = (&ids, &x, &y, &folds, &fingerprint);
                scope.spawn(move || -> Result<FoldMetrics> {
                    let mut train = (Vec::new(), Vec::new(), Vec::new());
                    let mut test = (Vec::new(), Vec::new());
                    for i in 0..ids.len() {
                        if folds[i] == f {
                            test.0.push(x[i].clone());
                            test.1.push(y[i]);
                        } else {
                            train.0.push(ids[i].clone());
                            train.1.push(x[i].clone());
                            train.2.push(y[i]);
                        }
                    }
                    let model = classifiers::train(spec, fingerprint, &train.0, &train.1, &train.2)?;
                    let scores = model.predict_proba(fingerprint, &test.0)?;
                    Ok(FoldMetrics {
                        fold: f,
                        metrics: Metrics::from_scores(&scores, &test.1)?,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fold worker panicked"))
            .collect()
    });
    let folds: Vec<FoldMetrics> = results.into_iter().collect::<Result<_>>()?;

    let mut flags = Vec::new();
    for f in &folds {
        if f.metrics.auc.is_none() {
            flags.push(format!("fold {}: single class in test set, AUC undefined", f.fold));
        }
        if f.metrics.precision_undefined {
            flags.push(format!(
                "fold {}: no predicted positives, precision reported as 0",
                f.fold
            ));
        }
    }
    let units: Vec<Metrics> = folds.iter().map(|f| f.metrics.clone()).collect();
    let (mean, std) = summarize(&units);
    Ok(MetricsReport {
        model_id: format!("{}+{}", spec.kind().short_name(), fingerprint),
        split_id: split_id.to_string(),
        embedding_fingerprint: fingerprint,
        spec: *spec,
        folds,
        mean,
        std,
        flags,
        timestamp: None,
    })
}
