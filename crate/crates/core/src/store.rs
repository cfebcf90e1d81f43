//! Directory-backed dataset store.
//!
//! Every entity lives in its own append-only NDJSON file; embeddings are a
//! flat little-endian `f32` matrix plus an NDJSON manifest. The byte layout
//! is documented in `docs/STORE_FORMAT.md`. A store is opened either
//! read-only (any number of readers) or read-write, in which case an
//! exclusive OS file lock on `.writer.lock` enforces a single writer.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::split::{self, SplitAssignment};
use crate::types::{Label, PhaseKind};

pub const FORMAT_NAME: &str = "ctlens-store";
pub const FORMAT_VERSION: u32 = 1;

const INDEX_FILE: &str = "index.json";
const LOCK_FILE: &str = ".writer.lock";
const DOCUMENTS_FILE: &str = "documents.ndjson";
const LABELS_FILE: &str = "labels.ndjson";
const EMBEDDINGS_BIN: &str = "embeddings.bin";
const EMBEDDINGS_MANIFEST: &str = "embeddings.manifest.ndjson";
const SPLITS_FILE: &str = "splits.ndjson";
const PREDICTIONS_FILE: &str = "predictions.ndjson";
const ANNOTATIONS_FILE: &str = "annotations.ndjson";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    ReadOnly,
    ReadWrite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Consensus,
    Import,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub post_id: String,
    pub label: Label,
    pub origin: Origin,
    pub phase: PhaseKind,
}

/// Outcome of one model (or one LLM run) on one post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictionOutput {
    Score { score: f64 },
    Label { label: Label },
    Unparseable,
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub post_id: String,
    pub model_id: String,
    pub run_index: u32,
    pub output: PredictionOutput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub justification: Option<String>,
}

impl PredictionRecord {
    pub fn validate(&self) -> Result<()> {
        if let PredictionOutput::Score { score } = self.output {
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::Domain(format!(
                    "prediction score {score} for {} outside [0, 1]",
                    self.post_id
                )));
            }
        }
        Ok(())
    }

    /// Score in [0, 1] for ranking; hard labels map to 0/1.
    pub fn score(&self) -> Option<f64> {
        match &self.output {
            PredictionOutput::Score { score } => Some(*score),
            PredictionOutput::Label { label } => Some(if label.is_positive() { 1.0 } else { 0.0 }),
            _ => None,
        }
    }

    pub fn is_completed(&self) -> bool {
        !matches!(self.output, PredictionOutput::Failed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct SplitRow {
    split_id: String,
    k: usize,
    seed: u64,
    post_id: String,
    fold: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub split_id: String,
    pub k: usize,
    pub seed: u64,
    pub assignments: Vec<SplitAssignment>,
}

impl SplitInfo {
    pub fn fold_of(&self) -> HashMap<&str, usize> {
        self.assignments.iter().map(|a| (a.post_id.as_str(), a.fold)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingHeader {
    pub fingerprint: String,
    pub dim: usize,
    pub dtype: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct EmbeddingRow {
    post_id: String,
    row: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Index {
    format: String,
    version: u32,
}

/// Document query; all set fields must match.
#[derive(Debug, Clone, Default)]
pub struct DocFilter {
    pub subreddit: Option<String>,
    pub labeled_only: bool,
    pub ids: Option<Vec<String>>,
}

#[derive(Debug, Default)]
struct Embeddings {
    header: Option<EmbeddingHeader>,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
    /// Rows physically present in embeddings.bin (>= ids.len() before compaction).
    physical_rows: usize,
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    mode: Mode,
    _lock: Option<File>,
    documents: Vec<Document>,
    doc_index: HashMap<String, usize>,
    labels: Vec<LabeledSample>,
    label_index: HashMap<String, usize>,
    embeddings: Embeddings,
    splits: BTreeMap<String, SplitInfo>,
    predictions: Vec<PredictionRecord>,
    annotation_events: Vec<serde_json::Value>,
}

impl Store {
    /// Create an empty store directory (or open an existing one read-write).
    pub fn create(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let index_path = root.join(INDEX_FILE);
        if !index_path.exists() {
            let index = Index {
                format: FORMAT_NAME.into(),
                version: FORMAT_VERSION,
            };
            let mut text = serde_json::to_string_pretty(&index)?;
            text.push('\n');
            fs::write(&index_path, text).map_err(|e| Error::io(&index_path, e))?;
        }
        Self::open(root, Mode::ReadWrite)
    }

    pub fn open(root: impl AsRef<Path>, mode: Mode) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let index_path = root.join(INDEX_FILE);
        let text =
            fs::read_to_string(&index_path).map_err(|_| Error::NotFound(format!("no store at {}", root.display())))?;
        let index: Index = serde_json::from_str(&text)?;
        if index.format != FORMAT_NAME || index.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported store format {} v{}",
                index.format, index.version
            )));
        }
        let lock = match mode {
            Mode::ReadOnly => None,
            Mode::ReadWrite => {
                let path = root.join(LOCK_FILE);
                let file = OpenOptions::new()
                    .create(true)
                    .truncate(false)
                    .write(true)
                    .open(&path)
                    .map_err(|e| Error::io(&path, e))?;
                file.try_lock()
                    .map_err(|_| Error::Permission(format!("store {} is locked by another writer", root.display())))?;
                Some(file)
            }
        };

        let mut store = Store {
            root,
            mode,
            _lock: lock,
            documents: Vec::new(),
            doc_index: HashMap::new(),
            labels: Vec::new(),
            label_index: HashMap::new(),
            embeddings: Embeddings::default(),
            splits: BTreeMap::new(),
            predictions: Vec::new(),
            annotation_events: Vec::new(),
        };
        store.load()?;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    fn load(&mut self) -> Result<()> {
        for doc in read_ndjson::<Document>(&self.root.join(DOCUMENTS_FILE))? {
            self.doc_index.insert(doc.post_id.clone(), self.documents.len());
            self.documents.push(doc);
        }
        // later rows for the same post are overrides
        for sample in read_ndjson::<LabeledSample>(&self.root.join(LABELS_FILE))? {
            self.insert_label_in_memory(sample);
        }
        self.load_embeddings()?;
        for row in read_ndjson::<SplitRow>(&self.root.join(SPLITS_FILE))? {
            let info = self.splits.entry(row.split_id.clone()).or_insert_with(|| SplitInfo {
                split_id: row.split_id.clone(),
                k: row.k,
                seed: row.seed,
                assignments: Vec::new(),
            });
            info.assignments.push(SplitAssignment {
                post_id: row.post_id,
                fold: row.fold,
            });
        }
        self.predictions = read_ndjson(&self.root.join(PREDICTIONS_FILE))?;
        self.annotation_events = read_ndjson(&self.root.join(ANNOTATIONS_FILE))?;
        Ok(())
    }

    fn load_embeddings(&mut self) -> Result<()> {
        let manifest_path = self.root.join(EMBEDDINGS_MANIFEST);
        if !manifest_path.exists() {
            return Ok(());
        }
        let file = File::open(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let mut lines = BufReader::new(file).lines();
        let header: EmbeddingHeader = match lines.next() {
            Some(line) => serde_json::from_str(&line.map_err(|e| Error::io(&manifest_path, e))?)?,
            None => return Ok(()),
        };
        if header.dtype != "f32le" {
            return Err(Error::Format(format!("unsupported embedding dtype {}", header.dtype)));
        }
        let bin_path = self.root.join(EMBEDDINGS_BIN);
        let mut bytes = Vec::new();
        if bin_path.exists() {
            File::open(&bin_path)
                .and_then(|mut f| f.read_to_end(&mut bytes))
                .map_err(|e| Error::io(&bin_path, e))?;
        }
        let row_bytes = header.dim * 4;
        if row_bytes == 0 || bytes.len() % row_bytes != 0 {
            return Err(Error::Integrity(format!(
                "{} is not a whole number of {}-dim rows",
                bin_path.display(),
                header.dim
            )));
        }
        let physical_rows = bytes.len() / row_bytes;
        let mut latest: Vec<(String, usize)> = Vec::new();
        let mut pos: HashMap<String, usize> = HashMap::new();
        for line in lines {
            let line = line.map_err(|e| Error::io(&manifest_path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row: EmbeddingRow = serde_json::from_str(&line)?;
            if row.row >= physical_rows {
                return Err(Error::Integrity(format!(
                    "manifest row {} for {} beyond end of matrix",
                    row.row, row.post_id
                )));
            }
            match pos.get(&row.post_id) {
                Some(&i) => latest[i].1 = row.row,
                None => {
                    pos.insert(row.post_id.clone(), latest.len());
                    latest.push((row.post_id, row.row));
                }
            }
        }
        let emb = &mut self.embeddings;
        emb.data.reserve(latest.len() * header.dim);
        for (id, row) in latest {
            let start = row * row_bytes;
            emb.data.extend(
                bytes[start..start + row_bytes]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])),
            );
            emb.index.insert(id.clone(), emb.ids.len());
            emb.ids.push(id);
        }
        emb.physical_rows = physical_rows;
        emb.header = Some(header);
        Ok(())
    }

    fn ensure_writable(&self) -> Result<()> {
        match self.mode {
            Mode::ReadWrite => Ok(()),
            Mode::ReadOnly => Err(Error::Permission(format!(
                "store {} is open read-only",
                self.root.display()
            ))),
        }
    }

    fn insert_label_in_memory(&mut self, sample: LabeledSample) {
        match self.label_index.get(&sample.post_id) {
            Some(&i) => self.labels[i] = sample,
            None => {
                self.label_index.insert(sample.post_id.clone(), self.labels.len());
                self.labels.push(sample);
            }
        }
    }

    // ---- documents ----

    /// Append documents. Re-putting an identical document is a no-op; a
    /// different document under an existing id is a conflict. Returns the
    /// number of newly written documents.
    pub fn put_documents(&mut self, docs: &[Document]) -> Result<usize> {
        self.ensure_writable()?;
        let mut fresh = Vec::new();
        let mut seen = HashSet::new();
        for doc in docs {
            if let Some(&i) = self.doc_index.get(&doc.post_id) {
                if self.documents[i] != *doc {
                    return Err(Error::Conflict(format!(
                        "document {} already stored with different content",
                        doc.post_id
                    )));
                }
                continue;
            }
            if !seen.insert(doc.post_id.as_str()) {
                return Err(Error::Conflict(format!("document {} repeated in batch", doc.post_id)));
            }
            fresh.push(doc.clone());
        }
        append_ndjson(&self.root.join(DOCUMENTS_FILE), &fresh)?;
        let written = fresh.len();
        for doc in fresh {
            self.doc_index.insert(doc.post_id.clone(), self.documents.len());
            self.documents.push(doc);
        }
        Ok(written)
    }

    pub fn get_documents(&self, filter: &DocFilter) -> Result<Vec<Document>> {
        let selected: Vec<&Document> = match &filter.ids {
            Some(ids) => ids
                .iter()
                .map(|id| {
                    self.doc_index
                        .get(id)
                        .map(|&i| &self.documents[i])
                        .ok_or_else(|| Error::NotFound(format!("document {id}")))
                })
                .collect::<Result<_>>()?,
            None => self.documents.iter().collect(),
        };
        Ok(selected
            .into_iter()
            .filter(|d| filter.subreddit.as_ref().is_none_or(|s| &d.subreddit == s))
            .filter(|d| !filter.labeled_only || self.label_index.contains_key(&d.post_id))
            .cloned()
            .collect())
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.doc_index.get(id).map(|&i| &self.documents[i])
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    // ---- labels ----

    /// Record labels. A post may carry only one label; replacing it requires
    /// `allow_override`.
    pub fn put_labels(&mut self, samples: &[LabeledSample], allow_override: bool) -> Result<()> {
        self.ensure_writable()?;
        let mut seen = HashSet::new();
        for s in samples {
            if !self.doc_index.contains_key(&s.post_id) {
                return Err(Error::NotFound(format!("document {} for label", s.post_id)));
            }
            if !seen.insert(s.post_id.as_str()) {
                return Err(Error::Conflict(format!("label for {} repeated in batch", s.post_id)));
            }
            if !allow_override && self.label_index.contains_key(&s.post_id) {
                return Err(Error::Conflict(format!("post {} already has a label", s.post_id)));
            }
        }
        append_ndjson(&self.root.join(LABELS_FILE), samples)?;
        for s in samples {
            self.insert_label_in_memory(s.clone());
        }
        Ok(())
    }

    pub fn labels(&self) -> &[LabeledSample] {
        &self.labels
    }

    pub fn label(&self, post_id: &str) -> Option<Label> {
        self.label_index.get(post_id).map(|&i| self.labels[i].label)
    }

    // ---- sampling and splits ----

    /// Seeded uniform sample of document ids from the named subreddits (all
    /// subreddits when the set is empty), optionally skipping labeled posts.
    pub fn sample_for_annotation(
        &self,
        n: usize,
        subreddits: &[String],
        seed: u64,
        exclude_labeled: bool,
    ) -> Result<Vec<String>> {
        let eligible: Vec<String> = self
            .documents
            .iter()
            .filter(|d| subreddits.is_empty() || subreddits.contains(&d.subreddit))
            .filter(|d| !exclude_labeled || !self.label_index.contains_key(&d.post_id))
            .map(|d| d.post_id.clone())
            .collect();
        split::sample_ids(&eligible, n, seed)
    }

    /// Build and persist a stratified split over every labeled sample.
    pub fn make_split(&mut self, split_id: &str, k: usize, seed: u64) -> Result<&SplitInfo> {
        self.ensure_writable()?;
        if self.splits.contains_key(split_id) {
            return Err(Error::Conflict(format!("split {split_id} already exists")));
        }
        let labels: Vec<(String, Label)> = self.labels.iter().map(|l| (l.post_id.clone(), l.label)).collect();
        let assignments = split::make_stratified_folds(&labels, k, seed)?;
        let rows: Vec<SplitRow> = assignments
            .iter()
            .map(|a| SplitRow {
                split_id: split_id.to_string(),
                k,
                seed,
                post_id: a.post_id.clone(),
                fold: a.fold,
            })
            .collect();
        append_ndjson(&self.root.join(SPLITS_FILE), &rows)?;
        let info = SplitInfo {
            split_id: split_id.to_string(),
            k,
            seed,
            assignments,
        };
        Ok(self.splits.entry(split_id.to_string()).or_insert(info))
    }

    pub fn split(&self, split_id: &str) -> Result<&SplitInfo> {
        self.splits
            .get(split_id)
            .ok_or_else(|| Error::NotFound(format!("split {split_id}")))
    }

    pub fn split_ids(&self) -> Vec<String> {
        self.splits.keys().cloned().collect()
    }

    // ---- embeddings ----

    pub fn embedding_header(&self) -> Option<&EmbeddingHeader> {
        self.embeddings.header.as_ref()
    }

    pub fn embedding(&self, post_id: &str) -> Option<Vec<f64>> {
        let emb = &self.embeddings;
        let dim = emb.header.as_ref()?.dim;
        let i = *emb.index.get(post_id)?;
        Some(emb.data[i * dim..(i + 1) * dim].iter().map(|&v| v as f64).collect())
    }

    pub fn has_embedding(&self, post_id: &str, fingerprint: &str) -> bool {
        self.embeddings
            .header
            .as_ref()
            .is_some_and(|h| h.fingerprint == fingerprint)
            && self.embeddings.index.contains_key(post_id)
    }

    pub fn embedded_ids(&self) -> &[String] {
        &self.embeddings.ids
    }

    /// Append embedding rows. The first write fixes the store's fingerprint
    /// and dimension; later writes must match both.
    pub fn put_embeddings(&mut self, fingerprint: &str, dim: usize, rows: &[(String, Vec<f64>)]) -> Result<()> {
        self.ensure_writable()?;
        match &self.embeddings.header {
            Some(h) if h.fingerprint != fingerprint || h.dim != dim => {
                return Err(Error::Integrity(format!(
                    "embedding fingerprint {fingerprint} (dim {dim}) does not match store fingerprint {} (dim {})",
                    h.fingerprint, h.dim
                )));
            }
            _ => {}
        }
        if dim == 0 {
            return Err(Error::Integrity("zero-dimensional embeddings".into()));
        }
        for (id, values) in rows {
            if values.len() != dim {
                return Err(Error::Integrity(format!(
                    "embedding for {id} has {} values, store dimension is {dim}",
                    values.len()
                )));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Integrity(format!("embedding for {id} has non-finite values")));
            }
        }
        let manifest_path = self.root.join(EMBEDDINGS_MANIFEST);
        if self.embeddings.header.is_none() {
            let header = EmbeddingHeader {
                fingerprint: fingerprint.to_string(),
                dim,
                dtype: "f32le".into(),
            };
            // a stale manifest without header rows cannot exist: rewrite from scratch
            let mut text = serde_json::to_string(&header)?;
            text.push('\n');
            fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
            let bin = self.root.join(EMBEDDINGS_BIN);
            fs::write(&bin, []).map_err(|e| Error::io(&bin, e))?;
            self.embeddings.header = Some(header);
        }

        let mut blob = Vec::with_capacity(rows.len() * dim * 4);
        let mut manifest_rows = Vec::with_capacity(rows.len());
        for (i, (id, values)) in rows.iter().enumerate() {
            for &v in values {
                blob.extend_from_slice(&(v as f32).to_le_bytes());
            }
            manifest_rows.push(EmbeddingRow {
                post_id: id.clone(),
                row: self.embeddings.physical_rows + i,
            });
        }
        let bin_path = self.root.join(EMBEDDINGS_BIN);
        append_bytes(&bin_path, &blob)?;
        append_ndjson(&manifest_path, &manifest_rows)?;

        let emb = &mut self.embeddings;
        emb.physical_rows += rows.len();
        for (id, values) in rows {
            let as_f32 = values.iter().map(|&v| v as f32);
            match emb.index.get(id) {
                Some(&i) => {
                    for (slot, v) in emb.data[i * dim..(i + 1) * dim].iter_mut().zip(as_f32) {
                        *slot = v;
                    }
                }
                None => {
                    emb.index.insert(id.clone(), emb.ids.len());
                    emb.ids.push(id.clone());
                    emb.data.extend(as_f32);
                }
            }
        }
        Ok(())
    }

    // ---- predictions ----

    pub fn put_predictions(&mut self, records: &[PredictionRecord]) -> Result<()> {
        self.ensure_writable()?;
        for r in records {
            r.validate()?;
        }
        append_ndjson(&self.root.join(PREDICTIONS_FILE), records)?;
        self.predictions.extend_from_slice(records);
        Ok(())
    }

    pub fn predictions(&self) -> &[PredictionRecord] {
        &self.predictions
    }

    /// Latest record per (post, run) for one model.
    pub fn predictions_for(&self, model_id: &str) -> Vec<&PredictionRecord> {
        let mut latest: BTreeMap<(&str, u32), &PredictionRecord> = BTreeMap::new();
        for r in self.predictions.iter().filter(|r| r.model_id == model_id) {
            latest.insert((r.post_id.as_str(), r.run_index), r);
        }
        latest.into_values().collect()
    }

    // ---- annotation audit log ----

    pub fn append_annotation_events<T: Serialize>(&mut self, events: &[T]) -> Result<()> {
        self.ensure_writable()?;
        let values = events
            .iter()
            .map(serde_json::to_value)
            .collect::<std::result::Result<Vec<_>, _>>()?;
        append_ndjson(&self.root.join(ANNOTATIONS_FILE), &values)?;
        self.annotation_events.extend(values);
        Ok(())
    }

    pub fn annotation_events<T: DeserializeOwned>(&self) -> Result<Vec<T>> {
        self.annotation_events
            .iter()
            .map(|v| serde_json::from_value(v.clone()).map_err(Error::from))
            .collect()
    }

    // ---- maintenance ----

    /// Rewrite every file without superseded rows (labels replaced by
    /// overrides, duplicate embedding rows, repeated predictions). The audit
    /// log is never compacted.
    pub fn compact(&mut self) -> Result<()> {
        self.ensure_writable()?;
        rewrite_ndjson(&self.root.join(DOCUMENTS_FILE), &self.documents)?;
        rewrite_ndjson(&self.root.join(LABELS_FILE), &self.labels)?;

        let mut preds: Vec<PredictionRecord> = Vec::new();
        let mut pos: HashMap<(String, String, u32), usize> = HashMap::new();
        for r in &self.predictions {
            let key = (r.model_id.clone(), r.post_id.clone(), r.run_index);
            match pos.get(&key) {
                Some(&i) => preds[i] = r.clone(),
                None => {
                    pos.insert(key, preds.len());
                    preds.push(r.clone());
                }
            }
        }
        rewrite_ndjson(&self.root.join(PREDICTIONS_FILE), &preds)?;
        self.predictions = preds;

        if let Some(header) = &self.embeddings.header {
            let mut manifest = serde_json::to_string(header)?;
            manifest.push('\n');
            for (i, id) in self.embeddings.ids.iter().enumerate() {
                manifest.push_str(&serde_json::to_string(&EmbeddingRow {
                    post_id: id.clone(),
                    row: i,
                })?);
                manifest.push('\n');
            }
            let blob: Vec<u8> = self.embeddings.data.iter().flat_map(|v| v.to_le_bytes()).collect();
            atomic_write(&self.root.join(EMBEDDINGS_BIN), &blob)?;
            atomic_write(&self.root.join(EMBEDDINGS_MANIFEST), manifest.as_bytes())?;
            self.embeddings.physical_rows = self.embeddings.ids.len();
        }
        Ok(())
    }
}

pub fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value =
            serde_json::from_str(&line).map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(value);
    }
    Ok(out)
}

/// Append records as one buffered write.
pub fn append_ndjson<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    if records.is_empty() {
        return Ok(());
    }
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    append_bytes(path, &buf)
}

fn append_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    file.write_all(bytes).map_err(|e| Error::io(path, e))?;
    file.flush().map_err(|e| Error::io(path, e))
}

pub fn write_ndjson<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn rewrite_ndjson<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r)?;
        buf.push(b'\n');
    }
    atomic_write(path, &buf)
}

fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
