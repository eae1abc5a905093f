//! Core domain types shared by every module.
//!
//! All types here are immutable after construction and validate their
//! invariants in the constructor; invalid fields are rejected, never
//! clamped. Real values are `f64` throughout.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("prompt id must be nonempty")]
    EmptyPromptId,
    #[error("prompt text must be nonempty (id `{0}`)")]
    EmptyPromptText(String),
    #[error("temperature must be finite and >= 0, got {0}")]
    BadTemperature(f64),
    #[error("top_p must be in (0, 1], got {0}")]
    BadTopP(f64),
    #[error("max_tokens must be positive")]
    BadMaxTokens,
    #[error("token_count must be 0 exactly when text is empty")]
    TokenTextMismatch,
    #[error("latency_ms must be finite and >= 0, got {0}")]
    BadLatency(f64),
    #[error("quality out of range: {0} is not in [0, 1]")]
    QualityOutOfRange(f64),
    #[error("degenerate pair: preferred and dispreferred responses are identical")]
    DegeneratePair,
}

/// An input prompt. `ground_truth` is the optional reference answer used by
/// the correctness term of the paired reward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    id: String,
    text: String,
    ground_truth: Option<String>,
}

impl Prompt {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, CoreError> {
        let id = id.into();
        let text = text.into();
        if id.is_empty() {
            return Err(CoreError::EmptyPromptId);
        }
        if text.is_empty() {
            return Err(CoreError::EmptyPromptText(id));
        }
        Ok(Self { id, text, ground_truth: None })
    }

    pub fn with_ground_truth(mut self, answer: impl Into<String>) -> Self {
        self.ground_truth = Some(answer.into());
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn ground_truth(&self) -> Option<&str> {
        self.ground_truth.as_deref()
    }
}

/// Sampling settings for one decode call.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeParams {
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
    seed: u64,
}

impl DecodeParams {
    pub fn new(temperature: f64, top_p: f64, max_tokens: u32, seed: u64) -> Result<Self, CoreError> {
        if !temperature.is_finite() || temperature < 0.0 {
            return Err(CoreError::BadTemperature(temperature));
        }
        if !top_p.is_finite() || top_p <= 0.0 || top_p > 1.0 {
            return Err(CoreError::BadTopP(top_p));
        }
        if max_tokens == 0 {
            return Err(CoreError::BadMaxTokens);
        }
        Ok(Self { temperature, top_p, max_tokens, seed })
    }

    /// Greedy settings: temperature 0, full nucleus.
    pub fn greedy(max_tokens: u32, seed: u64) -> Self {
        Self { temperature: 0.0, top_p: 1.0, max_tokens, seed }
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn top_p(&self) -> f64 {
        self.top_p
    }

    pub fn max_tokens(&self) -> u32 {
        self.max_tokens
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// One completed decode. `token_count` is whatever the backend reports;
/// there is no tokenizer in this crate.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    pub prompt_id: String,
    pub params: DecodeParams,
    text: String,
    token_count: u64,
    latency_ms: f64,
}

impl GenerationResult {
    pub fn new(
        prompt_id: impl Into<String>,
        params: DecodeParams,
        text: impl Into<String>,
        token_count: u64,
        latency_ms: f64,
    ) -> Result<Self, CoreError> {
        let text = text.into();
        if text.is_empty() != (token_count == 0) {
            return Err(CoreError::TokenTextMismatch);
        }
        if !latency_ms.is_finite() || latency_ms < 0.0 {
            return Err(CoreError::BadLatency(latency_ms));
        }
        Ok(Self { prompt_id: prompt_id.into(), params, text, token_count, latency_ms })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn token_count(&self) -> u64 {
        self.token_count
    }

    pub fn latency_ms(&self) -> f64 {
        self.latency_ms
    }
}

/// A (prompt, response) pair with a reference quality score in [0, 1].
#[derive(Debug, Clone)]
pub struct ScoredSample {
    pub prompt: Prompt,
    pub response: String,
    reference_quality: f64,
}

impl ScoredSample {
    pub fn new(prompt: Prompt, response: impl Into<String>, reference_quality: f64) -> Result<Self, CoreError> {
        if !reference_quality.is_finite() || !(0.0..=1.0).contains(&reference_quality) {
            return Err(CoreError::QualityOutOfRange(reference_quality));
        }
        Ok(Self { prompt, response: response.into(), reference_quality })
    }

    pub fn reference_quality(&self) -> f64 {
        self.reference_quality
    }
}

/// One preference record: a prompt with a preferred and a dispreferred
/// response. The two responses must differ.
#[derive(Debug, Clone)]
pub struct PreferencePair {
    pub prompt: Prompt,
    preferred: String,
    dispreferred: String,
}

impl PreferencePair {
    pub fn new(
        prompt: Prompt,
        preferred: impl Into<String>,
        dispreferred: impl Into<String>,
    ) -> Result<Self, CoreError> {
        let preferred = preferred.into();
        let dispreferred = dispreferred.into();
        if preferred == dispreferred {
            return Err(CoreError::DegeneratePair);
        }
        Ok(Self { prompt, preferred, dispreferred })
    }

    pub fn preferred(&self) -> &str {
        &self.preferred
    }

    pub fn dispreferred(&self) -> &str {
        &self.dispreferred
    }
}

/// Cost counters for a run. Fields only ever grow.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunMetrics {
    pub backend_calls: u64,
    pub generated_tokens: u64,
    /// Generation time attributed by the backend (scripted backends report 0,
    /// so scripted runs stay byte-deterministic).
    pub wall_ms: f64,
}

impl RunMetrics {
    pub fn record_call(&mut self, tokens: u64, latency_ms: f64) {
        self.backend_calls += 1;
        self.generated_tokens += tokens;
        self.wall_ms += latency_ms.max(0.0);
    }

    /// A failed call still costs a backend round trip.
    pub fn record_failed_call(&mut self) {
        self.backend_calls += 1;
    }

    pub fn merge(&mut self, other: &RunMetrics) {
        self.backend_calls += other.backend_calls;
        self.generated_tokens += other.generated_tokens;
        self.wall_ms += other.wall_ms;
    }
}
