//! Text-generation providers and concurrent fan-out.
//!
//! A [`TextBackend`] turns (prompt, decode params, slot) into one
//! [`GenerationResult`]. Two implementations ship: a deterministic
//! [`ScriptedBackend`] addressed by (prompt id, slot), and an
//! [`HttpBackend`] speaking the OpenAI-compatible chat-completions
//! protocol.
//!
//! [`fan_out`] issues every slot of a schedule concurrently, bounded by an
//! in-flight limit, and returns results in schedule order with per-slot
//! failures kept in place so one bad decode never discards its siblings.

mod http;
mod schedule;
mod script;

pub use http::{HttpBackend, API_KEY_ENV};
pub use schedule::{default_schedules, DecodeSchedule, ScheduleRanges, DEFAULT_MAX_TOKENS};
pub use script::{Script, ScriptedBackend};

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{DecodeParams, GenerationResult, Prompt, RunMetrics};

/// Default bound on simultaneously in-flight generation calls.
pub const DEFAULT_IN_FLIGHT: usize = 8;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("transport failure on slot {slot}{}: {message}", status.map(|s| format!(" (status {s})")).unwrap_or_default())]
    Transport { slot: usize, status: Option<u16>, message: String },
    #[error("malformed completion body on slot {slot}: {message}")]
    BadResponse { slot: usize, message: String },
    #[error("script error: {0}")]
    Script(String),
    #[error("http backend requires an endpoint")]
    MissingEndpoint,
    #[error("all {} slots failed: {}", failures.len(), summarize(failures))]
    AllSlotsFailed { failures: Vec<SlotFailure> },
    #[error("schedule must be nonempty")]
    EmptySchedule,
    #[error("schedule entries must be pairwise distinct in (temperature, top_p, seed)")]
    DuplicateScheduleEntry,
    #[error("parallel probe count m must be >= 2, got {0}")]
    BadProbeCount(usize),
    #[error("candidate count k must be >= 1")]
    BadCandidateCount,
    #[error("invalid generation: {0}")]
    InvalidGeneration(#[from] crate::types::CoreError),
}

fn summarize(failures: &[SlotFailure]) -> String {
    failures
        .iter()
        .map(|f| format!("slot {}: {}", f.slot, f.message))
        .collect::<Vec<_>>()
        .join("; ")
}

/// What went wrong on one slot of a fan-out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotFailure {
    pub slot: usize,
    pub status: Option<u16>,
    pub message: String,
}

impl SlotFailure {
    fn from_error(slot: usize, err: &BackendError) -> Self {
        let status = match err {
            BackendError::Transport { status, .. } => *status,
            _ => None,
        };
        Self { slot, status, message: err.to_string() }
    }
}

/// One slot's result: the generation, or the failure left in place.
pub type SlotOutcome = Result<GenerationResult, SlotFailure>;

/// Which provider to talk to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[default]
    Scripted,
    Http,
}

/// Provider selection and transport settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    pub endpoint: Option<String>,
    pub model_name: Option<String>,
    pub timeout_ms: u64,
}

impl Default for BackendDescriptor {
    fn default() -> Self {
        Self { kind: BackendKind::Scripted, endpoint: None, model_name: None, timeout_ms: 30_000 }
    }
}

impl BackendDescriptor {
    pub fn validate(&self) -> Result<(), BackendError> {
        if self.kind == BackendKind::Http && self.endpoint.is_none() {
            return Err(BackendError::MissingEndpoint);
        }
        Ok(())
    }
}

/// A text-generation provider. Implementations must tolerate concurrent
/// calls; fan-out invokes them from multiple threads.
pub trait TextBackend: Sync {
    fn generate(
        &self,
        prompt: &Prompt,
        params: &DecodeParams,
        slot: usize,
    ) -> Result<GenerationResult, BackendError>;
}

/// Runs every schedule entry against the backend, at most `in_flight` at a
/// time, and returns one outcome per entry at that entry's index. Slot
/// numbers are `base_slot..base_slot + schedule.len()`. Per-slot failures
/// stay in place; only a fan-out in which every slot fails is an error.
pub fn fan_out(
    backend: &dyn TextBackend,
    prompt: &Prompt,
    schedule: &DecodeSchedule,
    in_flight: usize,
    base_slot: usize,
) -> Result<Vec<SlotOutcome>, BackendError> {
    let entries = schedule.entries();
    let n = entries.len();
    let slots: Mutex<Vec<Option<SlotOutcome>>> = Mutex::new(vec![None; n]);
    let cursor = AtomicUsize::new(0);
    let workers = in_flight.max(1).min(n);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let slot = base_slot + i;
                let outcome = backend
                    .generate(prompt, &entries[i], slot)
                    .map_err(|e| SlotFailure::from_error(slot, &e));
                slots.lock().expect("fan-out lock")[i] = Some(outcome);
            });
        }
    });

    let outcomes: Vec<SlotOutcome> = slots
        .into_inner()
        .expect("fan-out lock")
        .into_iter()
        .map(|o| o.expect("every slot visited"))
        .collect();

    if outcomes.iter().all(|o| o.is_err()) {
        let failures = outcomes.into_iter().map(|o| o.unwrap_err()).collect();
        return Err(BackendError::AllSlotsFailed { failures });
    }
    Ok(outcomes)
}

/// Folds a fan-out into run metrics: every slot is one backend call, and
/// successful slots contribute their token counts and reported latency.
pub fn absorb_fan_out(metrics: &mut RunMetrics, outcomes: &[SlotOutcome]) {
    for outcome in outcomes {
        match outcome {
            Ok(gen) => metrics.record_call(gen.token_count(), gen.latency_ms()),
            Err(_) => metrics.record_failed_call(),
        }
    }
}
