//! OpenAI-compatible chat-completions client.
//!
//! Speaks `POST {endpoint}/chat/completions` with a single user message and
//! the decode settings, and reads `choices[0].message.content` plus
//! `usage.completion_tokens`. A bearer token is taken from the
//! `EGRM_API_KEY` environment variable when present.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::types::{DecodeParams, GenerationResult, Prompt};

use super::{BackendDescriptor, BackendError, TextBackend};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "EGRM_API_KEY";

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'static str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
    seed: u64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Usage {
    #[serde(default)]
    completion_tokens: Option<u64>,
}

/// HTTP provider. One configurable retry per slot, nothing more.
pub struct HttpBackend {
    agent: ureq::Agent,
    url: String,
    model: String,
    api_key: Option<String>,
    retry_once: bool,
}

impl HttpBackend {
    pub fn new(descriptor: &BackendDescriptor, retry_once: bool) -> Result<Self, BackendError> {
        descriptor.validate()?;
        let endpoint = descriptor.endpoint.clone().ok_or(BackendError::MissingEndpoint)?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(descriptor.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            url: format!("{}/chat/completions", endpoint.trim_end_matches('/')),
            model: descriptor.model_name.clone().unwrap_or_else(|| "default".to_string()),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            retry_once,
        })
    }

    fn call_once(
        &self,
        prompt: &Prompt,
        params: &DecodeParams,
        slot: usize,
    ) -> Result<GenerationResult, BackendError> {
        let body = ChatRequest {
            model: &self.model,
            messages: vec![ChatMessage { role: "user", content: prompt.text() }],
            temperature: params.temperature(),
            top_p: params.top_p(),
            max_tokens: params.max_tokens(),
            seed: params.seed(),
        };

        let started = Instant::now();
        let mut request = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(&body)
            .map_err(|e| BackendError::Transport { slot, status: None, message: e.to_string() })?;

        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let detail = response.body_mut().read_to_string().unwrap_or_default();
            return Err(BackendError::Transport {
                slot,
                status: Some(status),
                message: format!("non-2xx response: {}", detail.chars().take(200).collect::<String>()),
            });
        }

        let parsed: ChatResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::BadResponse { slot, message: e.to_string() })?;
        let latency_ms = started.elapsed().as_secs_f64() * 1000.0;

        let text = parsed
            .choices
            .first()
            .and_then(|c| c.message.content.clone())
            .ok_or_else(|| BackendError::BadResponse {
                slot,
                message: "missing choices[0].message.content".to_string(),
            })?;
        let tokens = parsed
            .usage
            .and_then(|u| u.completion_tokens)
            .unwrap_or_else(|| text.split_whitespace().count() as u64);
        // Guard the token/text invariant against providers that report zero
        // usage for nonempty completions.
        let tokens = if text.is_empty() { 0 } else { tokens.max(1) };

        Ok(GenerationResult::new(prompt.id(), params.clone(), text, tokens, latency_ms)?)
    }
}

impl TextBackend for HttpBackend {
    fn generate(
        &self,
        prompt: &Prompt,
        params: &DecodeParams,
        slot: usize,
    ) -> Result<GenerationResult, BackendError> {
        match self.call_once(prompt, params, slot) {
            Ok(result) => Ok(result),
            Err(first) if self.retry_once => self.call_once(prompt, params, slot).map_err(|_| first),
            Err(e) => Err(e),
        }
    }
}
