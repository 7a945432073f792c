//! Structured-output requests with a bounded repair loop.
//!
//! Agents ask for one JSON object, validate it against the target type's
//! invariants and, on violation, re-ask with the violation named. A call that
//! still fails after `max_repairs` re-asks surfaces as
//! [`AgentError::Invalid`]. Every model call is returned as a [`CallRecord`]
//! so callers can assemble deterministic transcripts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::backend::{short_hash, BackendError, ChatMessage, ChatProvider, ChatRequest};
use crate::prompts::{PromptSet, TemplateError};

pub const DEFAULT_MAX_REPAIRS: u32 = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("`{tag}`: {source}")]
    Backend {
        tag: String,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("`{tag}`: invalid output after {attempts} attempt(s): {violation}")]
    Invalid {
        tag: String,
        attempts: u32,
        violation: String,
        raw: String,
        calls: Vec<CallRecord>,
    },
}

impl AgentError {
    pub fn is_backend(&self) -> bool {
        matches!(self, Self::Backend { .. })
    }
}

/// One model call as seen in a transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub tag: String,
    pub agent: Option<String>,
    pub attempt: u32,
    pub prompt_hash: String,
    pub response_hash: String,
}

/// Parsed model output plus the raw text it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredOutput<T> {
    pub raw: String,
    pub parsed: T,
    pub repair_attempts: u32,
    pub calls: Vec<CallRecord>,
}

/// Shared handle for agents: provider, templates and call settings.
#[derive(Clone, Copy)]
pub struct AgentContext<'a> {
    pub provider: &'a dyn ChatProvider,
    pub prompts: &'a PromptSet,
    pub max_repairs: u32,
    pub temperature: Option<f64>,
    pub concurrency: usize,
}

impl<'a> AgentContext<'a> {
    pub fn new(provider: &'a dyn ChatProvider, prompts: &'a PromptSet) -> Self {
        Self {
            provider,
            prompts,
            max_repairs: DEFAULT_MAX_REPAIRS,
            temperature: None,
            concurrency: 4,
        }
    }

    pub fn with_max_repairs(mut self, max_repairs: u32) -> Self {
        self.max_repairs = max_repairs;
        self
    }

    pub fn with_concurrency(mut self, concurrency: usize) -> Self {
        self.concurrency = concurrency.max(1);
        self
    }

    pub fn with_temperature(mut self, temperature: Option<f64>) -> Self {
        self.temperature = temperature;
        self
    }

    /// Render `role` into a request tagged with the role name.
    pub fn request(
        &self,
        role: &str,
        vars: &BTreeMap<&str, String>,
    ) -> Result<ChatRequest, AgentError> {
        let (system, user) = self.prompts.render_pair(role, vars)?;
        Ok(ChatRequest::new(role, system, user).with_temperature(self.temperature))
    }

    fn call(
        &self,
        request: &ChatRequest,
        attempt: u32,
    ) -> Result<(String, CallRecord), AgentError> {
        let text = self
            .provider
            .complete(request)
            .map_err(|source| AgentError::Backend {
                tag: request.tag.clone(),
                source,
            })?;
        let record = CallRecord {
            tag: request.tag.clone(),
            agent: request.context.get("agent_id").cloned(),
            attempt,
            prompt_hash: request.prompt_hash(),
            response_hash: short_hash(text.as_bytes()),
        };
        Ok((text, record))
    }

    /// Single call, no validation beyond the provider's non-empty check.
    pub fn ask_text(&self, request: ChatRequest) -> Result<StructuredOutput<String>, AgentError> {
        let (text, record) = self.call(&request, 0)?;
        Ok(StructuredOutput {
            raw: text.clone(),
            parsed: text,
            repair_attempts: 0,
            calls: vec![record],
        })
    }

    /// Call, validate, and re-ask up to `max_repairs` times.
    pub fn ask<T>(
        &self,
        request: ChatRequest,
        validate: impl Fn(&str) -> Result<T, String>,
    ) -> Result<StructuredOutput<T>, AgentError> {
        self.ask_with_repairs(request, self.max_repairs, validate)
    }

    pub fn ask_with_repairs<T>(
        &self,
        mut request: ChatRequest,
        max_repairs: u32,
        validate: impl Fn(&str) -> Result<T, String>,
    ) -> Result<StructuredOutput<T>, AgentError> {
        let mut calls = Vec::new();
        let mut attempt = 0;
        loop {
            let (raw, record) = self.call(&request, attempt)?;
            calls.push(record);
            match validate(&raw) {
                Ok(parsed) => {
                    return Ok(StructuredOutput {
                        raw,
                        parsed,
                        repair_attempts: attempt,
                        calls,
                    })
                }
                Err(violation) if attempt >= max_repairs => {
                    return Err(AgentError::Invalid {
                        tag: request.tag.clone(),
                        attempts: attempt + 1,
                        violation,
                        raw,
                        calls,
                    })
                }
                Err(violation) => {
                    let mut vars = BTreeMap::new();
                    vars.insert("violation", violation);
                    let repair = self.prompts.render_section("repair", "user", &vars)?;
                    request.messages.push(ChatMessage::assistant(raw));
                    request.messages.push(ChatMessage::user(repair));
                    attempt += 1;
                }
            }
        }
    }
}

/// Locate and parse the first JSON object in model output, tolerating
/// surrounding prose and code fences.
pub fn extract_json_object(text: &str) -> Result<Map<String, Value>, String> {
    let bytes = text.as_bytes();
    let mut search_from = 0;
    while let Some(offset) = text[search_from..].find('{') {
        let start = search_from + offset;
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        let mut end = None;
        for (i, &b) in bytes.iter().enumerate().skip(start) {
            if in_string {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_string = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_string = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let Some(end) = end else {
            search_from = start + 1;
            continue;
        };
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(&text[start..=end]) {
            return Ok(map);
        }
        search_from = start + 1;
    }
    Err("output contains no JSON object".into())
}

pub fn get_str<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a str, String> {
    match obj.get(key) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s),
        Some(Value::String(_)) => Err(format!("field `{key}` must not be empty")),
        Some(other) => Err(format!("field `{key}` must be a string, got {other}")),
        None => Err(format!("missing field `{key}`")),
    }
}

/// Integer field; integral floats such as `4.0` are accepted.
pub fn get_int(obj: &Map<String, Value>, key: &str) -> Result<i64, String> {
    match obj.get(key) {
        Some(Value::Number(n)) => {
            if let Some(i) = n.as_i64() {
                Ok(i)
            } else if let Some(f) = n.as_f64().filter(|f| f.fract() == 0.0 && f.abs() < 1e15) {
                Ok(f as i64)
            } else {
                Err(format!("field `{key}` must be an integer, got {n}"))
            }
        }
        Some(other) => Err(format!("field `{key}` must be an integer, got {other}")),
        None => Err(format!("missing field `{key}`")),
    }
}

pub fn get_f64(obj: &Map<String, Value>, key: &str) -> Result<f64, String> {
    match obj.get(key) {
        Some(Value::Number(n)) => n
            .as_f64()
            .ok_or_else(|| format!("field `{key}` is not a finite number")),
        Some(other) => Err(format!("field `{key}` must be a number, got {other}")),
        None => Err(format!("missing field `{key}`")),
    }
}

/// Normalize an enum label: trim, lowercase, spaces and hyphens to `_`.
pub fn normalize_label(s: &str) -> String {
    s.trim()
        .to_lowercase()
        .chars()
        .map(|c| if c == ' ' || c == '-' { '_' } else { c })
        .collect()
}
