//! Transport plumbing shared by the embedding and chat providers: error
//! classification, bounded exponential backoff and a small blocking HTTP
//! helper.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ProviderError {
    #[error("rate limited (retry after {retry_after:?})")]
    RateLimited { retry_after: Option<Duration> },
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("invalid provider response: {0}")]
    Invalid(String),
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::RateLimited { .. } | ProviderError::Transport(_) => true,
            ProviderError::Status { status, .. } => *status >= 500,
            ProviderError::Invalid(_) => false,
        }
    }
}

impl From<ProviderError> for crate::Error {
    fn from(e: ProviderError) -> Self {
        match e {
            ProviderError::Invalid(msg) => crate::Error::Integrity(msg),
            other => crate::Error::Transport(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay_ms: 500,
            max_delay_ms: 30_000,
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            base_delay_ms: 0,
            max_delay_ms: 0,
        }
    }

    /// Delay before retry number `retry` (1-based): base * 2^(retry-1),
    /// capped. A provider `Retry-After` hint wins, up to five minutes.
    pub fn delay(&self, retry: u32, hint: Option<Duration>) -> Duration {
        if let Some(h) = hint {
            return h.min(Duration::from_secs(300));
        }
        let exp = self.base_delay_ms.saturating_mul(1u64 << (retry - 1).min(32));
        Duration::from_millis(exp.min(self.max_delay_ms))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetryOutcome<T> {
    pub result: Result<T, ProviderError>,
    /// Failed attempts that were followed by another attempt.
    pub retries: Vec<ProviderError>,
}

/// Run `op` until it succeeds, fails with a non-retryable error or the
/// attempt budget is spent.
pub fn with_retry<T>(policy: &RetryPolicy, mut op: impl FnMut() -> Result<T, ProviderError>) -> RetryOutcome<T> {
    let attempts = policy.max_attempts.max(1);
    let mut retries = Vec::new();
    for attempt in 1..=attempts {
        match op() {
            Ok(v) => return RetryOutcome { result: Ok(v), retries },
            Err(e) if e.is_retryable() && attempt < attempts => {
                let hint = match &e {
                    ProviderError::RateLimited { retry_after } => *retry_after,
                    _ => None,
                };
                let wait = policy.delay(attempt, hint);
                tracing::warn!(attempt, error = %e, wait_ms = wait.as_millis() as u64, "provider call failed, retrying");
                retries.push(e);
                if !wait.is_zero() {
                    std::thread::sleep(wait);
                }
            }
            Err(e) => {
                return RetryOutcome {
                    result: Err(e),
                    retries,
                }
            }
        }
    }
    unreachable!("retry loop always returns")
}

/// POST a JSON body and decode a JSON reply, mapping HTTP failures onto
/// [`ProviderError`].
pub fn post_json<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
    client: &reqwest::blocking::Client,
    url: &str,
    auth: Option<&str>,
    body: &Req,
) -> Result<Resp, ProviderError> {
    let mut req = client.post(url).json(body);
    if let Some(token) = auth {
        req = req.bearer_auth(token);
    }
    let resp = req.send().map_err(|e| ProviderError::Transport(e.to_string()))?;
    let status = resp.status();
    if status.as_u16() == 429 {
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|s| s.trim().parse::<f64>().ok())
            .map(Duration::from_secs_f64);
        return Err(ProviderError::RateLimited { retry_after });
    }
    if !status.is_success() {
        let body = resp.text().unwrap_or_default();
        return Err(ProviderError::Status {
            status: status.as_u16(),
            body,
        });
    }
    resp.json::<Resp>().map_err(|e| ProviderError::Invalid(e.to_string()))
}

pub fn http_client(timeout: Duration) -> Result<reqwest::blocking::Client, crate::Error> {
    reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .map_err(|e| crate::Error::Transport(e.to_string()))
}

/// Resolve a bearer token from the named environment variable, if any.
pub fn auth_from_env(var: Option<&str>) -> Option<String> {
    var.and_then(|name| std::env::var(name).ok()).filter(|v| !v.is_empty())
}
