//! Text embeddings: provider access with caching into the store, cosine
//! similarity and similarity-ranked few-shot example selection.

mod cache;
mod provider;

pub use cache::{embed_batch, EmbedOptions, EmbedReport};
pub use provider::{
    fingerprint, hash_embedding, EmbedRequest, EmbedResponse, EmbeddingProvider, HttpEmbeddingProvider,
    MockEmbeddingProvider, MOCK_MODEL,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub post_id: String,
    pub dim: usize,
    pub values: Vec<f64>,
    pub provider_fingerprint: String,
}

/// One embedded candidate in a selection pool.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a> {
    pub id: &'a str,
    pub vector: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub query_id: String,
    /// (candidate id, cosine similarity), best first.
    pub neighbors: Vec<(String, f64)>,
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Undefined("cosine similarity with a zero vector".into()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// The `n` candidates most similar to `query`, ties broken by ascending id.
/// The query itself is never returned.
pub fn top_n(query_id: &str, query: &[f64], pool: &[Candidate<'_>], n: usize) -> Result<NeighborSet> {
    let mut scored = Vec::with_capacity(pool.len());
    for c in pool.iter().filter(|c| c.id != query_id) {
        scored.push((c.id, cosine_similarity(query, c.vector)?));
    }
    if scored.len() < n {
        return Err(Error::Size(format!(
            "pool has {} candidates besides the query, {n} requested",
            scored.len()
        )));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    scored.truncate(n);
    Ok(NeighborSet {
        query_id: query_id.to_string(),
        neighbors: scored.into_iter().map(|(id, s)| (id.to_string(), s)).collect(),
    })
}

/// Pick the `n` most similar positive and `n` most similar negative examples.
pub fn select_examples(
    query_id: &str,
    query: &[f64],
    n: usize,
    positive_pool: &[Candidate<'_>],
    negative_pool: &[Candidate<'_>],
) -> Result<(NeighborSet, NeighborSet)> {
    Ok((
        top_n(query_id, query, positive_pool, n)?,
        top_n(query_id, query, negative_pool, n)?,
    ))
}
