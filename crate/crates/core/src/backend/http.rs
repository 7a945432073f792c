use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{BackendError, ChatProvider, ChatRequest, EmbeddingProvider, EmbeddingVector};
use crate::exec::InflightLimit;

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "FAMLENS_API_KEY";

/// Capped exponential backoff. Construction guarantees strictly increasing
/// delays, so the cap acts as a ceiling check rather than a plateau.
#[derive(Debug, Clone, PartialEq)]
pub struct Backoff {
    base: Duration,
    factor: f64,
    cap: Duration,
    max_retries: u32,
}

impl Backoff {
    pub fn new(
        base: Duration,
        factor: f64,
        cap: Duration,
        max_retries: u32,
    ) -> Result<Self, BackendError> {
        if max_retries > 3 {
            return Err(BackendError::Config(format!(
                "at most 3 retries allowed, got {max_retries}"
            )));
        }
        if base.is_zero() || !(factor > 1.0 && factor.is_finite()) {
            return Err(BackendError::Config(
                "backoff needs a positive base and factor > 1".into(),
            ));
        }
        let policy = Self {
            base,
            factor,
            cap,
            max_retries,
        };
        let delays = policy.delays();
        if delays.windows(2).any(|w| w[0] >= w[1]) || delays.iter().any(|d| *d > cap) {
            return Err(BackendError::Config(format!(
                "cap {cap:?} flattens the backoff schedule {delays:?}"
            )));
        }
        Ok(policy)
    }

    pub fn max_retries(&self) -> u32 {
        self.max_retries
    }

    pub fn max_attempts(&self) -> u32 {
        self.max_retries + 1
    }

    /// Delay before retry `k` (0-based) is `base * factor^k`, bounded by the cap.
    pub fn delays(&self) -> Vec<Duration> {
        (0..self.max_retries)
            .map(|k| {
                let d = self.base.as_secs_f64() * self.factor.powi(k as i32);
                Duration::from_secs_f64(d.min(self.cap.as_secs_f64()))
            })
            .collect()
    }
}

impl Default for Backoff {
    fn default() -> Self {
        Self::new(Duration::from_millis(500), 2.0, Duration::from_secs(8), 3)
            .expect("valid default")
    }
}

#[derive(Debug, Clone)]
pub struct HttpSettings {
    pub base_url: String,
    pub model: String,
    pub api_key: String,
    pub timeout: Duration,
    pub backoff: Backoff,
}

impl HttpSettings {
    /// Reads the key from `api_key_env`; a missing variable is a config error.
    pub fn from_env(base_url: &str, model: &str, api_key_env: &str) -> Result<Self, BackendError> {
        let api_key = std::env::var(api_key_env).map_err(|_| {
            BackendError::Config(format!("environment variable {api_key_env} is not set"))
        })?;
        Ok(Self {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key,
            timeout: Duration::from_secs(120),
            backoff: Backoff::default(),
        })
    }
}

struct HttpClient {
    agent: ureq::Agent,
    settings: HttpSettings,
    limit: Arc<InflightLimit>,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fail(BackendError),
}

impl HttpClient {
    fn new(settings: HttpSettings, limit: Arc<InflightLimit>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(settings.timeout))
            .build()
            .into();
        Self {
            agent,
            settings,
            limit,
        }
    }

    fn attempt(&self, path: &str, body: &serde_json::Value) -> Attempt {
        let _permit = self.limit.acquire();
        let url = format!("{}/{path}", self.settings.base_url);
        let response = self
            .agent
            .post(&url)
            .header(
                "Authorization",
                &format!("Bearer {}", self.settings.api_key),
            )
            .header("Content-Type", "application/json")
            .send_json(body);
        let mut response = match response {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = response.status().as_u16();
        let text = match response.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        match status {
            200..=299 => Attempt::Done(text),
            401 | 403 => Attempt::Fail(BackendError::Auth(format!("HTTP {status}"))),
            408 | 429 | 500..=599 => Attempt::Retry(format!("HTTP {status}")),
            _ => Attempt::Fail(BackendError::Http { status, body: text }),
        }
    }

    fn post(&self, path: &str, body: &serde_json::Value) -> Result<String, BackendError> {
        let delays = self.settings.backoff.delays();
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(path, body) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(message) => {
                    let Some(delay) = delays.get(attempts as usize - 1) else {
                        return Err(BackendError::Transport { attempts, message });
                    };
                    log::warn!("{path}: {message}; retrying in {delay:?}");
                    thread::sleep(*delay);
                }
            }
        }
    }
}

/// Chat-completions client (`POST {base_url}/chat/completions`).
pub struct HttpChatProvider {
    client: HttpClient,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

impl HttpChatProvider {
    pub fn new(settings: HttpSettings, limit: Arc<InflightLimit>) -> Self {
        Self {
            client: HttpClient::new(settings, limit),
        }
    }

    fn body(&self, request: &ChatRequest) -> serde_json::Value {
        let mut messages = vec![json!({"role": "system", "content": request.system_prompt})];
        messages.extend(
            request
                .messages
                .iter()
                .map(|m| json!({"role": m.role.as_str(), "content": m.content})),
        );
        let mut body = json!({
            "model": self.client.settings.model,
            "messages": messages,
        });
        if let Some(t) = request.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(n) = request.max_output_tokens {
            body["max_tokens"] = json!(n);
        }
        body
    }
}

impl ChatProvider for HttpChatProvider {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        request.validate()?;
        let text = self.client.post("chat/completions", &self.body(request))?;
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::Decode(e.to_string()))?;
        let content = parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .unwrap_or_default();
        if content.trim().is_empty() {
            return Err(BackendError::EmptyResponse);
        }
        Ok(content)
    }

    fn id(&self) -> String {
        format!("http:{}", self.client.settings.model)
    }
}

/// Embeddings client (`POST {base_url}/embeddings`).
pub struct HttpEmbedder {
    client: HttpClient,
    dimension: usize,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    pub fn new(settings: HttpSettings, dimension: usize, limit: Arc<InflightLimit>) -> Self {
        Self {
            client: HttpClient::new(settings, limit),
            dimension,
        }
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, BackendError> {
        if text.is_empty() {
            return Err(BackendError::EmptyInput);
        }
        let body = json!({"model": self.client.settings.model, "input": text});
        let raw = self.client.post("embeddings", &body)?;
        let parsed: EmbeddingResponse =
            serde_json::from_str(&raw).map_err(|e| BackendError::Decode(e.to_string()))?;
        let values = parsed
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| BackendError::Decode("no embedding returned".into()))?;
        if values.len() != self.dimension {
            return Err(BackendError::Decode(format!(
                "expected {} dimensions, got {}",
                self.dimension,
                values.len()
            )));
        }
        EmbeddingVector::new(values)
    }

    fn id(&self) -> String {
        format!(
            "http-embed:{}:{}",
            self.client.settings.model, self.dimension
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_policy_has_three_increasing_delays() {
        let b = Backoff::default();
        let d = b.delays();
        assert_eq!(d.len(), 3);
        assert!(d[0] < d[1] && d[1] < d[2]);
        assert_eq!(b.max_attempts(), 4);
    }

    #[test]
    fn flattening_cap_is_rejected() {
        assert!(Backoff::new(Duration::from_secs(1), 2.0, Duration::from_secs(2), 3).is_err());
        assert!(Backoff::new(Duration::from_secs(1), 2.0, Duration::from_secs(60), 4).is_err());
        assert!(Backoff::new(Duration::from_secs(1), 1.0, Duration::from_secs(60), 3).is_err());
    }

    proptest! {
        #[test]
        fn constructible_policies_strictly_increase(
            base_ms in 1u64..5000,
            factor in 1.01f64..10.0,
            cap_s in 0u64..600,
            retries in 0u32..6,
        ) {
            if let Ok(b) = Backoff::new(Duration::from_millis(base_ms), factor, Duration::from_secs(cap_s), retries) {
                let d = b.delays();
                prop_assert!(b.max_attempts() <= 4);
                prop_assert!(d.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
