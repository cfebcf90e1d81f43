use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::provider::{post_json, ProviderError};

/// Wire request of the embedding protocol: `POST {base}/embed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
}

/// Wire response of the embedding protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub model: String,
    pub dim: usize,
    pub vectors: Vec<Vec<f64>>,
}

pub fn fingerprint(provider: &str, model: &str, dim: usize) -> String {
    format!("{provider}/{model}/{dim}")
}

pub trait EmbeddingProvider: Send + Sync {
    /// Provider name, the first component of the fingerprint.
    fn name(&self) -> &str;

    /// Fingerprint the provider will produce, when known before any call.
    fn expected_fingerprint(&self) -> Option<String> {
        None
    }

    fn embed(&self, texts: &[String]) -> Result<EmbedResponse, ProviderError>;
}

pub struct HttpEmbeddingProvider {
    name: String,
    url: String,
    auth: Option<String>,
    expected: Option<(String, usize)>,
    client: reqwest::blocking::Client,
}

impl HttpEmbeddingProvider {
    pub fn new(base_url: &str, auth: Option<String>, timeout: Duration) -> crate::Result<Self> {
        Ok(Self {
            name: "http".into(),
            url: format!("{}/embed", base_url.trim_end_matches('/')),
            auth,
            expected: None,
            client: crate::provider::http_client(timeout)?,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Declare the model and dimension so cache checks can run before the
    /// first request.
    pub fn expecting(mut self, model: impl Into<String>, dim: usize) -> Self {
        self.expected = Some((model.into(), dim));
        self
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn expected_fingerprint(&self) -> Option<String> {
        self.expected.as_ref().map(|(m, d)| fingerprint(&self.name, m, *d))
    }

    fn embed(&self, texts: &[String]) -> Result<EmbedResponse, ProviderError> {
        let body = EmbedRequest { texts: texts.to_vec() };
        post_json(&self.client, &self.url, self.auth.as_deref(), &body)
    }
}

/// Deterministic pseudo-embeddings by signed feature hashing of lowercase
/// word tokens (FNV-1a 64), L2-normalised. Texts sharing words land close
/// together, which is enough for pipeline tests without a neural model.
#[derive(Debug)]
pub struct MockEmbeddingProvider {
    dim: usize,
    calls: AtomicUsize,
    fail_first: AtomicUsize,
}

pub const MOCK_MODEL: &str = "hash-v1";

impl MockEmbeddingProvider {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "mock embedding dimension must be positive");
        Self {
            dim,
            calls: AtomicUsize::new(0),
            fail_first: AtomicUsize::new(0),
        }
    }

    /// Make the next `n` calls fail with a transport error.
    pub fn failing_first(self, n: usize) -> Self {
        self.fail_first.store(n, Ordering::SeqCst);
        self
    }

    /// Number of `embed` calls received, including failed ones.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn embed_text(&self, text: &str) -> Vec<f64> {
        hash_embedding(text, self.dim)
    }
}

pub fn hash_embedding(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for token in text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
    {
        let h = fnv1a(token.as_bytes());
        let bucket = (h % dim as u64) as usize;
        let sign = if (h >> 63) & 1 == 1 { -1.0 } else { 1.0 };
        v[bucket] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v[0] = 1.0;
        return v;
    }
    v.iter().map(|x| x / norm).collect()
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl EmbeddingProvider for MockEmbeddingProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn expected_fingerprint(&self) -> Option<String> {
        Some(fingerprint("mock", MOCK_MODEL, self.dim))
    }

    fn embed(&self, texts: &[String]) -> Result<EmbedResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let should_fail = self
            .fail_first
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok();
        if should_fail {
            return Err(ProviderError::Transport("injected failure".into()));
        }
        Ok(EmbedResponse {
            model: MOCK_MODEL.into(),
            dim: self.dim,
            vectors: texts.iter().map(|t| hash_embedding(t, self.dim)).collect(),
        })
    }
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for std::sync::Arc<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn expected_fingerprint(&self) -> Option<String> {
        (**self).expected_fingerprint()
    }

    fn embed(&self, texts: &[String]) -> Result<EmbedResponse, ProviderError> {
        (**self).embed(texts)
    }
}
