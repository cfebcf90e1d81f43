use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::provider::{fingerprint, EmbedResponse, EmbeddingProvider};
use super::EmbeddingVector;
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::provider::{with_retry, RetryPolicy};
use crate::store::Store;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedOptions {
    pub batch_size: usize,
    pub parallel: usize,
    pub retry: RetryPolicy,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self {
            batch_size: 64,
            parallel: 4,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedReport {
    pub requested: usize,
    pub cached: usize,
    pub embedded: usize,
    pub provider_batches: usize,
    pub retries: usize,
}

/// Embed `docs`, reusing every vector already cached in the store under the
/// same fingerprint. Returns one vector per input document, in input order.
pub fn embed_batch<P: EmbeddingProvider>(
    store: &mut Store,
    docs: &[Document],
    provider: &P,
    opts: &EmbedOptions,
) -> Result<(Vec<EmbeddingVector>, EmbedReport)> {
    if opts.batch_size == 0 {
        return Err(Error::Parameter("batch size must be positive".into()));
    }
    let store_fp = store.embedding_header().map(|h| h.fingerprint.clone());
    if let (Some(stored), Some(expected)) = (&store_fp, provider.expected_fingerprint()) {
        if *stored != expected {
            return Err(Error::Integrity(format!(
                "provider fingerprint {expected} does not match store fingerprint {stored}"
            )));
        }
    }

    let mut report = EmbedReport {
        requested: docs.len(),
        ..Default::default()
    };
    let mut pending: Vec<&Document> = Vec::new();
    let mut queued = HashSet::new();
    for d in docs {
        if store.embedding(&d.post_id).is_some() {
            report.cached += 1;
        } else if queued.insert(d.post_id.as_str()) {
            pending.push(d);
        }
    }

    let chunks: Vec<&[&Document]> = pending.chunks(opts.batch_size).collect();
    let results: Vec<Mutex<Option<Result<EmbedResponse>>>> = (0..chunks.len()).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let retries = AtomicUsize::new(0);
    let workers = opts.parallel.clamp(1, chunks.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(chunk) = chunks.get(i) else { break };
                let texts: Vec<String> = chunk.iter().map(|d| d.text.clone()).collect();
                let outcome = with_retry(&opts.retry, || provider.embed(&texts));
                retries.fetch_add(outcome.retries.len(), Ordering::SeqCst);
                *results[i].lock().expect("result slot poisoned") = Some(outcome.result.map_err(Error::from));
            });
        }
    });
    report.provider_batches = chunks.len();
    report.retries = retries.into_inner();

    // persist completed chunks in order; the first failure stops the run
    let mut first_error = None;
    let mut fp = store_fp;
    for (chunk, slot) in chunks.iter().zip(results) {
        let outcome = slot
            .into_inner()
            .expect("result slot poisoned")
            .expect("every chunk ran");
        let resp = match outcome {
            Ok(r) => r,
            Err(e) => {
                first_error = Some(e);
                break;
            }
        };
        let this_fp = fingerprint(provider.name(), &resp.model, resp.dim);
        if let Some(existing) = &fp {
            if *existing != this_fp {
                first_error = Some(Error::Integrity(format!(
                    "provider returned {this_fp} vectors for a store holding {existing}"
                )));
                break;
            }
        }
        if resp.vectors.len() != chunk.len() {
            first_error = Some(Error::Integrity(format!(
                "provider returned {} vectors for {} texts",
                resp.vectors.len(),
                chunk.len()
            )));
            break;
        }
        if let Some(bad) = resp.vectors.iter().find(|v| v.len() != resp.dim) {
            first_error = Some(Error::Integrity(format!(
                "provider declared dim {} but sent a vector of length {}",
                resp.dim,
                bad.len()
            )));
            break;
        }
        let rows: Vec<(String, Vec<f64>)> = chunk.iter().map(|d| d.post_id.clone()).zip(resp.vectors).collect();
        if let Err(e) = store.put_embeddings(&this_fp, resp.dim, &rows) {
            first_error = Some(e);
            break;
        }
        report.embedded += rows.len();
        fp = Some(this_fp);
    }
    if let Some(e) = first_error {
        return Err(e);
    }

    let header = store.embedding_header().cloned();
    let vectors = docs
        .iter()
        .map(|d| {
            let header = header.as_ref().expect("store has embeddings after a non-empty run");
            Ok(EmbeddingVector {
                post_id: d.post_id.clone(),
                dim: header.dim,
                values: store
                    .embedding(&d.post_id)
                    .ok_or_else(|| Error::Integrity(format!("no embedding stored for {}", d.post_id)))?,
                provider_fingerprint: header.fingerprint.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((vectors, report))
}
