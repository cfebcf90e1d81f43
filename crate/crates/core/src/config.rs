//! Pipeline configuration: TOML file, overridden by environment variables,
//! overridden by command-line flags. The CLI applies the last two layers.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provider::RetryPolicy;

const REDACTED: &str = "<redacted>";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub store: Option<PathBuf>,
    pub embedding: EmbeddingConfig,
    pub llm: LlmConfig,
    pub retry: RetryPolicy,
    pub seeds: Seeds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    /// "mock" or "http".
    pub provider: String,
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub dim: usize,
    /// Environment variable holding the bearer token.
    pub auth_env: Option<String>,
    /// Inline token; prefer `auth_env`.
    pub api_key: Option<String>,
    pub batch_size: usize,
    pub parallel: usize,
    pub timeout_secs: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            provider: "mock".into(),
            base_url: None,
            model: None,
            dim: 64,
            auth_env: None,
            api_key: None,
            batch_size: 64,
            parallel: 4,
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    /// "mock" or "http".
    pub provider: String,
    pub base_url: Option<String>,
    pub model: String,
    pub auth_env: Option<String>,
    pub api_key: Option<String>,
    pub parallel: usize,
    pub runs: u32,
    pub timeout_secs: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            provider: "mock".into(),
            base_url: None,
            model: "mock-chat".into(),
            auth_env: None,
            api_key: None,
            parallel: 4,
            runs: crate::llm::DEFAULT_RUNS,
            timeout_secs: 120,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub sample: u64,
    pub split: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { sample: 42, split: 42 }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// TOML rendering with inline secrets masked.
    pub fn redacted(&self) -> String {
        let mut c = self.clone();
        if c.embedding.api_key.is_some() {
            c.embedding.api_key = Some(REDACTED.into());
        }
        if c.llm.api_key.is_some() {
            c.llm.api_key = Some(REDACTED.into());
        }
        toml::to_string_pretty(&c).expect("config serializes")
    }
}

/// Token from the inline key or the named environment variable.
pub fn resolve_token(api_key: &Option<String>, auth_env: &Option<String>) -> Option<String> {
    api_key
        .clone()
        .filter(|k| !k.is_empty())
        .or_else(|| crate::provider::auth_from_env(auth_env.as_deref()))
}
