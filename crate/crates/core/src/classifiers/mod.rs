//! Classical classifiers over embedding vectors and their on-disk format.
//!
//! A saved model is a one-line JSON manifest (`*.model.json`) next to a
//! little-endian `f64` blob with the same stem and a `.bin` extension. The
//! blob holds `weights ++ [bias]` for linear models and the row-major
//! training matrix for k-NN.

mod knn;
mod lr;
mod svm;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use knn::{knn_predict, KnnParams, LabeledPoint};
pub use lr::{lr_gradient, lr_objective, LrParams};
pub use svm::{hinge_loss, svm_objective, svm_subgradient, SvmParams};

use crate::error::{Error, Result};
use crate::types::Label;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DECISION_THRESHOLD: f64 = 0.5;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Validate shapes and class balance; returns the input dimension.
pub(crate) fn check_training_data(x: &[Vec<f64>], y: &[Label]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} rows but {} labels", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::DegenerateTraining("need at least two samples".into()));
    }
    let dim = x[0].len();
    if let Some(bad) = x.iter().position(|r| r.len() != dim) {
        return Err(Error::Dimension(format!(
            "row {bad} has length {}, expected {dim}",
            x[bad].len()
        )));
    }
    let positives = y.iter().filter(|l| l.is_positive()).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::DegenerateTraining("labels contain a single class".into()));
    }
    Ok(dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Lr,
    Knn,
    LinearSvm,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lr" => Ok(ModelKind::Lr),
            "knn" => Ok(ModelKind::Knn),
            "svm" | "linear_svm" => Ok(ModelKind::LinearSvm),
            other => Err(Error::Parameter(format!("unknown model {other:?} (lr|svm|knn)"))),
        }
    }
}

impl ModelKind {
    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Knn => "knn",
            ModelKind::LinearSvm => "svm",
        }
    }
}

/// A model kind together with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Lr(LrParams),
    LinearSvm(SvmParams),
    Knn(KnnParams),
}

impl ModelSpec {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Lr => ModelSpec::Lr(LrParams::default()),
            ModelKind::LinearSvm => ModelSpec::LinearSvm(SvmParams::default()),
            ModelKind::Knn => ModelSpec::Knn(KnnParams::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Lr(_) => ModelKind::Lr,
            ModelSpec::LinearSvm(_) => ModelKind::LinearSvm,
            ModelSpec::Knn(_) => ModelKind::Knn,
        }
    }

    /// Apply one `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let float = || {
            value
                .parse::<f64>()
                .map_err(|_| Error::Parameter(format!("{key}={value} is not a number")))
        };
        let int = || {
            value
                .parse::<u64>()
                .map_err(|_| Error::Parameter(format!("{key}={value} is not an integer")))
        };
        match (self, key) {
            (ModelSpec::Lr(p), "l2") => p.l2 = float()?,
            (ModelSpec::Lr(p), "lr") => p.lr = float()?,
            (ModelSpec::Lr(p), "epochs") => p.epochs = int()? as usize,
            (ModelSpec::Lr(p), "seed") => p.seed = int()?,
            (ModelSpec::LinearSvm(p), "c") => p.c = float()?,
            (ModelSpec::LinearSvm(p), "lr") => p.lr = float()?,
            (ModelSpec::LinearSvm(p), "epochs") => p.epochs = int()? as usize,
            (ModelSpec::LinearSvm(p), "seed") => p.seed = int()?,
            (ModelSpec::Knn(p), "k") => p.k = int()? as usize,
            (spec, key) => {
                return Err(Error::Parameter(format!(
                    "unknown hyperparameter {key:?} for {}",
                    spec.kind().short_name()
                )))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub seed: u64,
    pub iterations: usize,
    pub loss_trace: Vec<f64>,
    pub n_train: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelParams {
    Linear {
        weights: Vec<f64>,
        bias: f64,
    },
    Knn {
        ids: Vec<String>,
        labels: Vec<Label>,
        vectors: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub fingerprint: String,
    pub dim: usize,
    pub params: ModelParams,
    pub meta: TrainingMeta,
}

/// Train `spec` on rows `x` with labels `y`. `ids` name the rows (used by
/// k-NN for tie-breaking) and `fingerprint` is the embedding fingerprint
/// the rows came from.
pub fn train(spec: &ModelSpec, fingerprint: &str, ids: &[String], x: &[Vec<f64>], y: &[Label]) -> Result<TrainedModel> {
    let dim = check_training_data(x, y)?;
    if ids.len() != x.len() {
        return Err(Error::Dimension(format!("{} ids for {} rows", ids.len(), x.len())));
    }
    let (params, meta) = match spec {
        ModelSpec::Lr(hp) => {
            let (weights, bias, meta) = lr::fit(x, y, hp)?;
            (ModelParams::Linear { weights, bias }, meta)
        }
        ModelSpec::LinearSvm(hp) => {
            let (weights, bias, meta) = svm::fit(x, y, hp)?;
            (ModelParams::Linear { weights, bias }, meta)
        }
        ModelSpec::Knn(hp) => {
            if hp.k == 0 || hp.k % 2 == 0 {
                return Err(Error::Parameter(format!("k must be odd and positive, got {}", hp.k)));
            }
            if hp.k > x.len() {
                return Err(Error::Size(format!("k = {} exceeds {} training points", hp.k, x.len())));
            }
            (
                ModelParams::Knn {
                    ids: ids.to_vec(),
                    labels: y.to_vec(),
                    vectors: x.to_vec(),
                },
                TrainingMeta {
                    seed: 0,
                    iterations: 0,
                    loss_trace: Vec::new(),
                    n_train: x.len(),
                },
            )
        }
    };
    Ok(TrainedModel {
        spec: *spec,
        fingerprint: fingerprint.to_string(),
        dim,
        params,
        meta,
    })
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }

    /// Scores in [0, 1]: sigmoid of the margin for linear models (used for
    /// ranking only in the SVM case) and the positive-neighbour share for k-NN.
    pub fn predict_proba(&self, fingerprint: &str, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        if fingerprint != self.fingerprint {
            return Err(Error::Integrity(format!(
                "model trained on {} embeddings applied to {fingerprint}",
                self.fingerprint
            )));
        }
        if let Some(bad) = x.iter().find(|r| r.len() != self.dim) {
            return Err(Error::Dimension(format!(
                "input of length {}, model expects {}",
                bad.len(),
                self.dim
            )));
        }
        match &self.params {
            ModelParams::Linear { weights, bias } => Ok(x.iter().map(|r| sigmoid(dot(weights, r) + bias)).collect()),
            ModelParams::Knn { ids, labels, vectors } => {
                let k = match self.spec {
                    ModelSpec::Knn(p) => p.k,
                    _ => unreachable!("knn params imply knn spec"),
                };
                let points: Vec<LabeledPoint> = ids
                    .iter()
                    .zip(labels)
                    .zip(vectors)
                    .map(|((id, &label), v)| LabeledPoint { id, label, vector: v })
                    .collect();
                x.iter().map(|q| knn_predict(&points, q, k).map(|(_, s)| s)).collect()
            }
        }
    }

    pub fn predict_labels(&self, fingerprint: &str, x: &[Vec<f64>]) -> Result<Vec<Label>> {
        Ok(self
            .predict_proba(fingerprint, x)?
            .into_iter()
            .map(|s| Label::from_positive(s > DECISION_THRESHOLD))
            .collect())
    }

    pub fn save(&self, manifest_path: &Path) -> Result<()> {
        let (blob_values, ids, labels): (Vec<f64>, Option<Vec<String>>, Option<Vec<Label>>) = match &self.params {
            ModelParams::Linear { weights, bias } => {
                let mut v = weights.clone();
                v.push(*bias);
                (v, None, None)
            }
            ModelParams::Knn { ids, labels, vectors } => (
                vectors.iter().flatten().copied().collect(),
                Some(ids.clone()),
                Some(labels.clone()),
            ),
        };
        let blob_path = blob_path(manifest_path);
        let manifest = ModelManifest {
            format_version: MODEL_FORMAT_VERSION,
            spec: self.spec,
            fingerprint: self.fingerprint.clone(),
            dim: self.dim,
            blob: blob_path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            blob_len: blob_values.len(),
            train_ids: ids,
            train_labels: labels,
            meta: self.meta.clone(),
        };
        let bytes: Vec<u8> = blob_values.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(&blob_path, bytes).map_err(|e| Error::io(&blob_path, e))?;
        let mut line = serde_json::to_string(&manifest)?;
        line.push('\n');
        fs::write(manifest_path, line).map_err(|e| Error::io(manifest_path, e))
    }

    pub fn load(manifest_path: &Path) -> Result<Self> {
        let text = fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
        let manifest: ModelManifest = serde_json::from_str(text.trim())?;
        if manifest.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format v{}",
                manifest.format_version
            )));
        }
        let blob_path = manifest_path.with_file_name(&manifest.blob);
        let bytes = fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
        if bytes.len() != manifest.blob_len * 8 {
            return Err(Error::Integrity(format!(
                "{} holds {} bytes, manifest expects {} values",
                blob_path.display(),
                bytes.len(),
                manifest.blob_len
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integrity("model parameters are not finite".into()));
        }
        let params = match manifest.spec {
            ModelSpec::Lr(_) | ModelSpec::LinearSvm(_) => {
                if values.len() != manifest.dim + 1 {
                    return Err(Error::Integrity("linear model blob has the wrong length".into()));
                }
                let (w, b) = values.split_at(manifest.dim);
                ModelParams::Linear {
                    weights: w.to_vec(),
                    bias: b[0],
                }
            }
            ModelSpec::Knn(_) => {
                let ids = manifest
                    .train_ids
                    .ok_or_else(|| Error::Format("knn manifest without ids".into()))?;
                let labels = manifest
                    .train_labels
                    .ok_or_else(|| Error::Format("knn manifest without labels".into()))?;
                if manifest.dim == 0 || values.len() != ids.len() * manifest.dim || labels.len() != ids.len() {
                    return Err(Error::Integrity("knn blob does not match manifest".into()));
                }
                ModelParams::Knn {
                    ids,
                    labels,
                    vectors: values.chunks_exact(manifest.dim).map(<[f64]>::to_vec).collect(),
                }
            }
        };
        Ok(TrainedModel {
            spec: manifest.spec,
            fingerprint: manifest.fingerprint,
            dim: manifest.dim,
            params,
            meta: manifest.meta,
        })
    }
}

fn blob_path(manifest_path: &Path) -> PathBuf {
    let name = manifest_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    let stem = name
        .strip_suffix(".model.json")
        .or_else(|| name.strip_suffix(".json"))
        .unwrap_or(&name);
    manifest_path.with_file_name(format!("{stem}.bin"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelManifest {
    format_version: u32,
    spec: ModelSpec,
    fingerprint: String,
    dim: usize,
    blob: String,
    blob_len: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    train_ids: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    train_labels: Option<Vec<Label>>,
    meta: TrainingMeta,
}
