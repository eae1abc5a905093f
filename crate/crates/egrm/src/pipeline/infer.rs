//! The five-step inference procedure and batch execution.
//!
//! 1. Probe: M parallel decodes (or one greedy decode in contains-cot mode).
//! 2. Route: consensus against tau, or the reasoning-marker criterion.
//!    Short terminates here with the majority answer.
//! 3. Generate K diverse candidates with the candidate schedule.
//! 4. Score every candidate with the discriminative scorer.
//! 5. Answer with the highest-scoring candidate (lowest index on ties).
//!
//! A forced-CoT run bypasses the routing decision but still issues the probe
//! decodes, so adaptive and forced runs differ only in what the routing
//! decision saves.

use std::time::Instant;

use serde::Serialize;

use crate::backend::{
    absorb_fan_out, fan_out, DecodeSchedule, SlotOutcome, TextBackend, DEFAULT_IN_FLIGHT,
};
use crate::consensus::{
    canonicalize, compute_consensus, contains_cot, extract_final_answer, route_by_threshold,
    ConsensusReport, ExtractorConfig, Route, RouterConfig, RoutingMode,
};
use crate::scorer::{ScorerModel, FEATURE_DIM};
use crate::types::{DecodeParams, Prompt, RunMetrics};

use super::PipelineError;

/// One scored long-route candidate.
#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub slot: usize,
    pub text: String,
    pub score: f64,
}

/// The result of running one prompt through the pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct InferenceOutcome {
    pub prompt_id: String,
    pub route: Route,
    /// Canonical answer: the consensus majority on the short route, the
    /// chosen candidate's extracted answer on the long route.
    pub answer: String,
    pub candidates: Vec<Candidate>,
    pub chosen_index: Option<usize>,
    /// Present in consensus mode; contains-cot mode has no probe histogram.
    pub consensus: Option<ConsensusReport>,
    pub metrics: RunMetrics,
}

/// Validated bundle of everything `infer` needs besides the prompt.
pub struct InferContext<'a> {
    backend: &'a dyn TextBackend,
    router: &'a RouterConfig,
    extractor: &'a ExtractorConfig,
    scorer: &'a ScorerModel,
    parallel: &'a DecodeSchedule,
    candidates: &'a DecodeSchedule,
    in_flight: usize,
}

impl<'a> InferContext<'a> {
    pub fn new(
        backend: &'a dyn TextBackend,
        router: &'a RouterConfig,
        extractor: &'a ExtractorConfig,
        scorer: &'a ScorerModel,
        parallel: &'a DecodeSchedule,
        candidates: &'a DecodeSchedule,
    ) -> Result<Self, PipelineError> {
        if parallel.len() != router.m {
            return Err(PipelineError::Configuration(format!(
                "parallel schedule has {} entries but router m = {}",
                parallel.len(),
                router.m
            )));
        }
        if candidates.is_empty() {
            return Err(PipelineError::Configuration("candidate schedule is empty".into()));
        }
        if scorer.d() != FEATURE_DIM {
            return Err(PipelineError::Configuration(format!(
                "scorer expects input dimension {}, text features have {}",
                scorer.d(),
                FEATURE_DIM
            )));
        }
        Ok(Self {
            backend,
            router,
            extractor,
            scorer,
            parallel,
            candidates,
            in_flight: DEFAULT_IN_FLIGHT,
        })
    }

    pub fn with_in_flight(mut self, in_flight: usize) -> Self {
        self.in_flight = in_flight.max(1);
        self
    }

    pub fn router(&self) -> &RouterConfig {
        self.router
    }

    pub fn probe_calls(&self) -> usize {
        match self.router.mode {
            RoutingMode::Consensus => self.parallel.len(),
            RoutingMode::ContainsCot => 1,
        }
    }

    pub fn candidate_calls(&self) -> usize {
        self.candidates.len()
    }
}

/// Probe result: the routing decision plus supporting evidence.
struct ProbeResult {
    route: Route,
    report: Option<ConsensusReport>,
    short_answer: String,
}

fn probe(
    prompt: &Prompt,
    ctx: &InferContext<'_>,
    metrics: &mut RunMetrics,
) -> Result<ProbeResult, PipelineError> {
    match ctx.router.mode {
        RoutingMode::Consensus => {
            let outcomes = run_fan_out(prompt, ctx, ctx.parallel, 0, metrics)?;
            let answers: Vec<_> = outcomes
                .iter()
                .filter_map(|o| o.as_ref().ok())
                .map(|g| canonicalize(&extract_final_answer(g.text(), ctx.extractor)))
                .collect();
            let report = compute_consensus(&answers).expect("fan-out guarantees one success");
            let route = route_by_threshold(report.consensus, ctx.router.tau);
            let short_answer = report.majority.clone();
            Ok(ProbeResult { route, report: Some(report.with_route(route)), short_answer })
        }
        RoutingMode::ContainsCot => {
            let greedy = DecodeParams::greedy(
                ctx.parallel.entries()[0].max_tokens(),
                ctx.parallel.entries()[0].seed(),
            );
            let single = DecodeSchedule::single(greedy);
            let outcomes = run_fan_out(prompt, ctx, &single, 0, metrics)?;
            let first = outcomes
                .iter()
                .find_map(|o| o.as_ref().ok())
                .expect("fan-out guarantees one success");
            let needs_cot =
                contains_cot(first.text(), Some(first.token_count()), ctx.extractor);
            let route = if needs_cot { Route::Long } else { Route::Short };
            let short_answer =
                canonicalize(&extract_final_answer(first.text(), ctx.extractor)).canonical;
            Ok(ProbeResult { route, report: None, short_answer })
        }
    }
}

fn run_fan_out(
    prompt: &Prompt,
    ctx: &InferContext<'_>,
    schedule: &DecodeSchedule,
    base_slot: usize,
    metrics: &mut RunMetrics,
) -> Result<Vec<SlotOutcome>, PipelineError> {
    match fan_out(ctx.backend, prompt, schedule, ctx.in_flight, base_slot) {
        Ok(outcomes) => {
            absorb_fan_out(metrics, &outcomes);
            Ok(outcomes)
        }
        Err(e) => {
            metrics.backend_calls += schedule.len() as u64;
            Err(PipelineError::Backend(e))
        }
    }
}

/// Runs one prompt through the pipeline. With `forced_cot` the probe still
/// happens (keeping cost accounting comparable) but the prompt always takes
/// the long route.
pub fn infer(
    prompt: &Prompt,
    ctx: &InferContext<'_>,
    forced_cot: bool,
) -> Result<InferenceOutcome, PipelineError> {
    let mut metrics = RunMetrics::default();
    infer_core(prompt, ctx, forced_cot, &mut metrics)
}

/// Implementation of [`infer`] that leaves spent calls visible in `metrics`
/// even when the prompt fails partway.
fn infer_core(
    prompt: &Prompt,
    ctx: &InferContext<'_>,
    forced_cot: bool,
    metrics: &mut RunMetrics,
) -> Result<InferenceOutcome, PipelineError> {
    let probe_result = probe(prompt, ctx, metrics)?;

    let route = if forced_cot { Route::Long } else { probe_result.route };
    if route == Route::Short {
        return Ok(InferenceOutcome {
            prompt_id: prompt.id().to_string(),
            route,
            answer: probe_result.short_answer,
            candidates: Vec::new(),
            chosen_index: None,
            consensus: probe_result.report,
            metrics: metrics.clone(),
        });
    }

    // Long route: generate K candidates after the M probe slots.
    let base_slot = ctx.parallel.len();
    let outcomes = run_fan_out(prompt, ctx, ctx.candidates, base_slot, metrics)?;

    let mut candidates = Vec::new();
    for (i, outcome) in outcomes.iter().enumerate() {
        if let Ok(generated) = outcome {
            let score = ctx
                .scorer
                .score_text(prompt, generated.text())
                .map_err(|e| PipelineError::Configuration(e.to_string()))?;
            candidates.push(Candidate { slot: base_slot + i, text: generated.text().to_string(), score });
        }
    }
    // fan_out guarantees at least one success, so candidates is nonempty.
    let chosen_index = candidates
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.score.partial_cmp(&b.score).expect("scores are finite").then(ib.cmp(ia))
        })
        .map(|(i, _)| i)
        .expect("at least one candidate");
    let answer =
        canonicalize(&extract_final_answer(&candidates[chosen_index].text, ctx.extractor)).canonical;

    Ok(InferenceOutcome {
        prompt_id: prompt.id().to_string(),
        route: Route::Long,
        answer,
        candidates,
        chosen_index: Some(chosen_index),
        consensus: probe_result.report,
        metrics: metrics.clone(),
    })
}

/// Aggregate cost and routing statistics for a batch run.
#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub n: usize,
    pub short_fraction: f64,
    pub calls: u64,
    pub tokens: u64,
    /// Backend-attributed generation time summed over prompts.
    pub wall_ms: f64,
    /// Measured wall-clock time of the whole batch; excluded from
    /// determinism comparisons.
    pub elapsed_ms: f64,
}

/// A prompt that failed inference.
#[derive(Debug, Clone, Serialize)]
pub struct BatchFailure {
    pub prompt_id: String,
    pub error: String,
}

/// Per-prompt outcomes plus the aggregate summary.
#[derive(Debug, Clone, Serialize)]
pub struct BatchReport {
    pub summary: BatchSummary,
    pub outcomes: Vec<InferenceOutcome>,
    pub errors: Vec<BatchFailure>,
}

/// Runs every prompt through [`infer`], isolating per-prompt failures.
pub fn run_batch(prompts: &[Prompt], ctx: &InferContext<'_>, forced_cot: bool) -> BatchReport {
    let started = Instant::now();
    let mut outcomes = Vec::with_capacity(prompts.len());
    let mut errors = Vec::new();
    let mut totals = RunMetrics::default();
    let mut short_count = 0usize;

    for prompt in prompts {
        let mut spent = RunMetrics::default();
        match infer_core(prompt, ctx, forced_cot, &mut spent) {
            Ok(outcome) => {
                totals.merge(&outcome.metrics);
                if outcome.route == Route::Short {
                    short_count += 1;
                }
                outcomes.push(outcome);
            }
            Err(e) => {
                // Calls spent before the failure still count.
                totals.merge(&spent);
                errors.push(BatchFailure { prompt_id: prompt.id().to_string(), error: e.to_string() });
            }
        }
    }

    let n = outcomes.len();
    BatchReport {
        summary: BatchSummary {
            n,
            short_fraction: if n == 0 { 0.0 } else { short_count as f64 / n as f64 },
            calls: totals.backend_calls,
            tokens: totals.generated_tokens,
            wall_ms: totals.wall_ms,
            elapsed_ms: started.elapsed().as_secs_f64() * 1000.0,
        },
        outcomes,
        errors,
    }
}
