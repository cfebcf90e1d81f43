//! Offline HTTP stand-in for the embedding and chat endpoints, backed by the
//! in-process mock providers.

use std::sync::Arc;

use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};

use crate::embedding::{EmbedRequest, EmbeddingProvider, MockEmbeddingProvider};
use crate::llm::{ChatProvider, ChatRequest, MockChatProvider};
use crate::provider::ProviderError;

#[derive(Clone)]
struct Mocks {
    embed: Arc<MockEmbeddingProvider>,
    chat: Arc<MockChatProvider>,
}

fn failure(e: ProviderError) -> Response {
    match e {
        ProviderError::RateLimited { retry_after } => {
            let secs = retry_after.map(|d| d.as_secs()).unwrap_or(1).to_string();
            (
                StatusCode::TOO_MANY_REQUESTS,
                [(header::RETRY_AFTER, secs)],
                "rate limited",
            )
                .into_response()
        }
        ProviderError::Status { status, body } => (
            StatusCode::from_u16(status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
            body,
        )
            .into_response(),
        other => (StatusCode::BAD_REQUEST, other.to_string()).into_response(),
    }
}

async fn embed(State(m): State<Mocks>, Json(req): Json<EmbedRequest>) -> Response {
    match m.embed.embed(&req.texts) {
        Ok(r) => Json(r).into_response(),
        Err(e) => failure(e),
    }
}

async fn chat(State(m): State<Mocks>, Json(req): Json<ChatRequest>) -> Response {
    match m.chat.complete(&req) {
        Ok(r) => Json(r).into_response(),
        Err(e) => failure(e),
    }
}

/// Routes `POST /embed` and `POST /chat/completions`.
pub fn router(embed_provider: Arc<MockEmbeddingProvider>, chat_provider: Arc<MockChatProvider>) -> Router {
    Router::new()
        .route("/embed", post(embed))
        .route("/chat/completions", post(chat))
        .with_state(Mocks {
            embed: embed_provider,
            chat: chat_provider,
        })
}
