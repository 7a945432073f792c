//! Chat and embedding providers.
//!
//! Every model call in the crate goes through [`ChatProvider`] or
//! [`EmbeddingProvider`]. Three implementations ship: an HTTP client for the
//! chat-completions wire format, a fixture-driven [`ScriptedProvider`] for
//! offline runs, and [`FnProvider`] for tests that need programmatic replies.

mod embedding;
mod http;
mod scripted;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use embedding::{
    cosine_similarity, EmbeddingProvider, EmbeddingVector, HashEmbedder, SimilarityError,
    DEFAULT_DIMENSION,
};
pub use http::{Backoff, HttpChatProvider, HttpEmbedder, HttpSettings, API_KEY_ENV};
pub use scripted::ScriptedProvider;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("provider returned an empty completion")]
    EmptyResponse,
    #[error("could not decode provider response: {0}")]
    Decode(String),
    #[error("no fixture for tag `{tag}` (prompt hash {hash})")]
    MissingFixture { tag: String, hash: String },
    #[error("fixture error: {0}")]
    Fixture(String),
    #[error("embedding input is empty")]
    EmptyInput,
    #[error("provider configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::System => "system",
            Self::User => "user",
            Self::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// A single chat-completion call.
///
/// `tag` names the pipeline stage. `context` carries small key/value facts
/// about the call (agent id, turn number, ...) that scripted fixtures may
/// interpolate; it is never sent to a remote provider and does not enter the
/// prompt hash.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub messages: Vec<ChatMessage>,
    /// `None` leaves the provider default in place.
    pub temperature: Option<f64>,
    pub max_output_tokens: Option<u32>,
    pub tag: String,
    pub context: BTreeMap<String, String>,
}

impl ChatRequest {
    pub fn new(
        tag: impl Into<String>,
        system_prompt: impl Into<String>,
        user: impl Into<String>,
    ) -> Self {
        Self {
            system_prompt: system_prompt.into(),
            messages: vec![ChatMessage::user(user)],
            temperature: None,
            max_output_tokens: None,
            tag: tag.into(),
            context: BTreeMap::new(),
        }
    }

    pub fn with_context(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.context.insert(key.into(), value.to_string());
        self
    }

    pub fn with_temperature(mut self, temperature: Option<f64>) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.messages.is_empty() {
            return Err(BackendError::Config("request has no messages".into()));
        }
        if let Some(t) = self.temperature {
            if !(t.is_finite() && t >= 0.0) {
                return Err(BackendError::Config(format!(
                    "temperature must be >= 0, got {t}"
                )));
            }
        }
        if self.max_output_tokens == Some(0) {
            return Err(BackendError::Config(
                "max_output_tokens must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Stable hash of the rendered prompt (system prompt plus messages).
    pub fn prompt_hash(&self) -> String {
        let canonical = serde_json::json!({
            "system": self.system_prompt,
            "messages": self.messages,
        });
        short_hash(canonical.to_string().as_bytes())
    }

    /// Full rendered prompt as one string, used for content checks.
    pub fn rendered(&self) -> String {
        let mut out = self.system_prompt.clone();
        for m in &self.messages {
            out.push_str("\n\n");
            out.push_str(&m.content);
        }
        out
    }
}

/// First 16 hex digits of SHA-256.
pub fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    hex::encode(&digest[..8])
}

pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError>;

    /// Identifier used in logs.
    fn id(&self) -> String;
}

impl<T: ChatProvider + ?Sized> ChatProvider for Arc<T> {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }

    fn id(&self) -> String {
        (**self).id()
    }
}

impl<T: ChatProvider + ?Sized> ChatProvider for &T {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }

    fn id(&self) -> String {
        (**self).id()
    }
}

type ReplyFn = dyn Fn(&ChatRequest) -> Result<String, BackendError> + Send + Sync;

/// Provider backed by a closure.
pub struct FnProvider {
    reply: Box<ReplyFn>,
}

impl FnProvider {
    pub fn new(
        reply: impl Fn(&ChatRequest) -> Result<String, BackendError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            reply: Box::new(reply),
        }
    }
}

impl ChatProvider for FnProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        request.validate()?;
        let text = (self.reply)(request)?;
        if text.trim().is_empty() {
            return Err(BackendError::EmptyResponse);
        }
        Ok(text)
    }

    fn id(&self) -> String {
        "fn".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_hash_ignores_tag_and_context() {
        let a = ChatRequest::new("a", "sys", "hello").with_context("agent", "e1");
        let b = ChatRequest::new("b", "sys", "hello");
        assert_eq!(a.prompt_hash(), b.prompt_hash());
        let c = ChatRequest::new("a", "sys", "hello!");
        assert_ne!(a.prompt_hash(), c.prompt_hash());
        assert_eq!(a.prompt_hash().len(), 16);
    }

    #[test]
    fn request_validation() {
        let mut r = ChatRequest::new("t", "s", "u");
        assert!(r.validate().is_ok());
        r.temperature = Some(-0.1);
        assert!(r.validate().is_err());
        r.temperature = Some(0.0);
        r.messages.clear();
        assert!(r.validate().is_err());
    }

    #[test]
    fn fn_provider_rejects_blank_text() {
        let p = FnProvider::new(|_| Ok("   ".into()));
        assert_eq!(
            p.complete(&ChatRequest::new("t", "s", "u")),
            Err(BackendError::EmptyResponse)
        );
    }
}
