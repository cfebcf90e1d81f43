use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::prompt::{ChatMessage, Role, Strategy};
use crate::provider::{http_client, post_json, ProviderError};

pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_TOKENS: u32 = 1500;

/// Body of `POST {base}/chat/completions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatChoice {
    pub message: ChatMessage,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub choices: Vec<ChatChoice>,
    #[serde(default)]
    pub usage: Option<Usage>,
}

impl ChatResponse {
    pub fn from_text(text: impl Into<String>) -> Self {
        Self {
            choices: vec![ChatChoice {
                message: ChatMessage::assistant(text),
            }],
            usage: None,
        }
    }

    pub fn content(&self) -> Result<&str, ProviderError> {
        self.choices
            .first()
            .map(|c| c.message.content.as_str())
            .ok_or_else(|| ProviderError::Invalid("chat response has no choices".into()))
    }
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ProviderError>;
}

impl<P: ChatProvider + ?Sized> ChatProvider for std::sync::Arc<P> {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        (**self).complete(req)
    }
}

impl<P: ChatProvider + ?Sized> ChatProvider for &P {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        (**self).complete(req)
    }
}

/// OpenAI-style chat completion endpoint.
pub struct HttpChatProvider {
    client: reqwest::blocking::Client,
    url: String,
    auth: Option<String>,
}

impl HttpChatProvider {
    pub fn new(base_url: &str, auth: Option<String>, timeout: Duration) -> crate::Result<Self> {
        Ok(Self {
            client: http_client(timeout)?,
            url: format!("{}/chat/completions", base_url.trim_end_matches('/')),
            auth,
        })
    }
}

impl ChatProvider for HttpChatProvider {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        post_json(&self.client, &self.url, self.auth.as_deref(), req)
    }
}

pub const DEFAULT_KEYWORDS: [&str; 10] = [
    "conspiracy",
    "cover-up",
    "cover up",
    "deep state",
    "false flag",
    "chemtrail",
    "psyop",
    "they don't want you to know",
    "secret plan",
    "plandemic",
];

#[derive(Debug, Clone, PartialEq)]
pub enum MockBehavior {
    /// Answer yes when the target contains one of the keywords.
    Keyword(Vec<String>),
    /// Reply with the final user message verbatim.
    Echo,
    /// Always reply with this text.
    Fixed(String),
}

/// Deterministic offline stand-in for a chat model.
pub struct MockChatProvider {
    behavior: MockBehavior,
    fail_markers: Vec<String>,
    rate_limit_first: AtomicUsize,
    calls: AtomicUsize,
}

impl MockChatProvider {
    pub fn new(behavior: MockBehavior) -> Self {
        Self {
            behavior,
            fail_markers: Vec::new(),
            rate_limit_first: AtomicUsize::new(0),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn keyword() -> Self {
        Self::new(MockBehavior::Keyword(
            DEFAULT_KEYWORDS.iter().map(|s| s.to_string()).collect(),
        ))
    }

    /// Fail with HTTP 500 whenever the target text contains `marker`.
    pub fn failing_on(mut self, marker: impl Into<String>) -> Self {
        self.fail_markers.push(marker.into());
        self
    }

    /// Answer the next `n` calls with 429.
    pub fn rate_limited_first(self, n: usize) -> Self {
        self.rate_limit_first.store(n, Ordering::SeqCst);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn respond(&self, messages: &[ChatMessage]) -> Result<String, ProviderError> {
        let last = messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .ok_or_else(|| ProviderError::Invalid("no user message".into()))?;
        let target = quoted_target(&last.content);
        if self.fail_markers.iter().any(|m| target.contains(m.as_str())) {
            return Err(ProviderError::Status {
                status: 500,
                body: "injected fault".into(),
            });
        }
        Ok(match &self.behavior {
            MockBehavior::Echo => last.content.clone(),
            MockBehavior::Fixed(s) => s.clone(),
            MockBehavior::Keyword(words) => {
                let lower = target.to_lowercase();
                let hit = words.iter().find(|w| lower.contains(&w.to_lowercase()));
                keyword_answer(detect_strategy(&last.content), hit.map(String::as_str))
            }
        })
    }
}

impl ChatProvider for MockChatProvider {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let pending = self.rate_limit_first.load(Ordering::SeqCst);
        if pending > 0
            && self
                .rate_limit_first
                .compare_exchange(pending, pending - 1, Ordering::SeqCst, Ordering::SeqCst)
                .is_ok()
        {
            return Err(ProviderError::RateLimited {
                retry_after: Some(Duration::ZERO),
            });
        }
        Ok(ChatResponse::from_text(self.respond(&req.messages)?))
    }
}

/// The text between the first and last double quote of an instruction.
fn quoted_target(instruction: &str) -> &str {
    match (instruction.find('"'), instruction.rfind('"')) {
        (Some(a), Some(b)) if b > a => &instruction[a + 1..b],
        _ => instruction,
    }
}

fn detect_strategy(instruction: &str) -> Strategy {
    let head = instruction.split('"').next().unwrap_or_default();
    if head.contains("First, extract") {
        Strategy::Sbs
    } else if head.contains("Justify your answer.") {
        Strategy::Justification
    } else {
        Strategy::Simple
    }
}

fn keyword_answer(strategy: Strategy, hit: Option<&str>) -> String {
    match (strategy, hit) {
        (Strategy::Simple, Some(_)) => "Yes.".into(),
        (Strategy::Simple, None) => "No.".into(),
        (Strategy::Justification, Some(k)) => {
            format!("Yes. The text refers to \"{k}\" and presents it as a hidden plan.")
        }
        (Strategy::Justification, None) => "No. The text does not describe a conspiracy theory.".into(),
        (Strategy::Sbs, Some(k)) => format!(
            "First, the text makes a claim involving \"{k}\".\n\
             Second, the claim suggests a hidden plan.\n\
             Third, the text supports the claim.\n\
             Fourth, yes"
        ),
        (Strategy::Sbs, None) => "First, the text makes an ordinary claim.\n\
             Second, the claim is not a known conspiracy theory.\n\
             Third, there is nothing to support.\n\
             Fourth, no"
            .into(),
    }
}
