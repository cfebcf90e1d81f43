//! Prompted classification with chat models: prompt rendering, verdict
//! parsing, providers and a resumable multi-run harness.

mod harness;
mod parse;
mod prompt;
mod provider;

pub use harness::{
    aggregate_runs, model_id, parse_model_id, reports_markdown, run_prompts, LlmReport, RunConfig, RunMetrics,
    RunSummary, DEFAULT_RUNS,
};
pub use parse::{parse_verdict, ParsedResponse, ParsedVerdict};
pub use prompt::{demonstration_answer, render_prompt, ChatMessage, PromptSpec, Role, Strategy, ALLOWED_SHOTS};
pub use provider::{
    ChatChoice, ChatProvider, ChatRequest, ChatResponse, HttpChatProvider, MockBehavior, MockChatProvider, Usage,
    DEFAULT_KEYWORDS, DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE,
};
