//! Consensus-based dataset partitioning and the toy SFT losses.
//!
//! Every prompt is probed with M parallel decodes. Agreeing prompts land in
//! the short set with the majority answer as target; disagreeing prompts
//! land in the long set with a reference reasoning chain taken from a
//! teacher backend when one is given, otherwise from the longest probe
//! response that carries reasoning markers.

use crate::backend::{absorb_fan_out, fan_out, DecodeSchedule, TextBackend};
use crate::consensus::{
    canonicalize, compute_consensus, contains_cot, extract_final_answer, route_by_threshold,
    ConsensusReport, ExtractorConfig, Route, RouterConfig,
};
use crate::rewards::{Tokenizer, ToyPolicy};
use crate::types::{DecodeParams, GenerationResult, Prompt, RunMetrics};

use super::PipelineError;

/// A direct-answer training example.
#[derive(Debug, Clone)]
pub struct ShortEntry {
    pub prompt: Prompt,
    /// Majority canonical answer of the probe decodes.
    pub answer: String,
    pub report: ConsensusReport,
}

/// A reasoning training example: reference chain plus final answer.
#[derive(Debug, Clone)]
pub struct LongEntry {
    pub prompt: Prompt,
    pub chain: String,
    pub answer: String,
    pub report: ConsensusReport,
}

/// A prompt whose probes all failed; recorded, never silently dropped.
#[derive(Debug, Clone)]
pub struct PartitionFailure {
    pub prompt_id: String,
    pub error: String,
}

/// The partitioned SFT dataset. Short and long sets are disjoint and
/// jointly cover every prompt that did not fail.
#[derive(Debug, Clone, Default)]
pub struct SftPartition {
    pub short: Vec<ShortEntry>,
    pub long: Vec<LongEntry>,
    pub failures: Vec<PartitionFailure>,
    pub metrics: RunMetrics,
}

impl SftPartition {
    pub fn short_fraction(&self) -> f64 {
        let n = self.short.len() + self.long.len();
        if n == 0 {
            0.0
        } else {
            self.short.len() as f64 / n as f64
        }
    }
}

/// Everything [`partition_sft`] needs besides the prompts.
pub struct PartitionContext<'a> {
    pub backend: &'a dyn TextBackend,
    /// Optional teacher used to generate reference chains for long prompts.
    pub teacher: Option<&'a dyn TextBackend>,
    pub router: &'a RouterConfig,
    pub extractor: &'a ExtractorConfig,
    pub parallel: &'a DecodeSchedule,
    pub in_flight: usize,
}

/// Splits a generation into (reasoning chain, final answer): the chain is
/// everything before the answer delimiter when present, otherwise the full
/// text.
fn split_chain(text: &str, extractor: &ExtractorConfig) -> (String, String) {
    let answer = extract_final_answer(text, extractor);
    let delim = extractor.answer_delimiter.as_bytes();
    let chain = text
        .as_bytes()
        .windows(delim.len().max(1))
        .rposition(|w| w.eq_ignore_ascii_case(delim))
        .map(|pos| text[..pos].trim_end().to_string())
        .unwrap_or_else(|| text.trim_end().to_string());
    (chain, answer)
}

/// Picks the reference chain source for a long prompt from its probe
/// responses: the longest response containing reasoning markers, falling
/// back to the longest response overall. Ties break toward the lowest slot.
fn fallback_chain_source<'a>(
    successes: &[&'a GenerationResult],
    extractor: &ExtractorConfig,
) -> &'a GenerationResult {
    fn longest<'b>(pool: &[&'b GenerationResult]) -> &'b GenerationResult {
        let mut best = pool[0];
        let mut best_len = best.text().chars().count();
        for g in &pool[1..] {
            let len = g.text().chars().count();
            if len > best_len {
                best = g;
                best_len = len;
            }
        }
        best
    }
    let with_cot: Vec<&'a GenerationResult> = successes
        .iter()
        .copied()
        .filter(|g| contains_cot(g.text(), Some(g.token_count()), extractor))
        .collect();
    if with_cot.is_empty() {
        longest(successes)
    } else {
        longest(&with_cot)
    }
}

/// Runs the probe + route step for every prompt and assembles the SFT
/// partition. Per-prompt fan-out failures go to the failures list.
pub fn partition_sft(
    prompts: &[Prompt],
    ctx: &PartitionContext<'_>,
) -> Result<SftPartition, PipelineError> {
    if ctx.parallel.len() != ctx.router.m {
        return Err(PipelineError::Configuration(format!(
            "parallel schedule has {} entries but router m = {}",
            ctx.parallel.len(),
            ctx.router.m
        )));
    }
    let mut partition = SftPartition::default();

    for prompt in prompts {
        let outcomes = match fan_out(ctx.backend, prompt, ctx.parallel, ctx.in_flight, 0) {
            Ok(o) => o,
            Err(e) => {
                // Even a fully failed fan-out spent its backend calls.
                partition.metrics.backend_calls += ctx.parallel.len() as u64;
                partition
                    .failures
                    .push(PartitionFailure { prompt_id: prompt.id().to_string(), error: e.to_string() });
                continue;
            }
        };
        absorb_fan_out(&mut partition.metrics, &outcomes);

        let successes: Vec<&GenerationResult> =
            outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
        let answers: Vec<_> = successes
            .iter()
            .map(|g| canonicalize(&extract_final_answer(g.text(), ctx.extractor)))
            .collect();
        let report = compute_consensus(&answers).expect("fan-out guarantees one success");
        let decision = route_by_threshold(report.consensus, ctx.router.tau);

        match decision {
            Route::Short => partition.short.push(ShortEntry {
                prompt: prompt.clone(),
                answer: report.majority.clone(),
                report: report.with_route(Route::Short),
            }),
            Route::Long => {
                let (chain, answer) = match ctx.teacher {
                    Some(teacher) => {
                        let params = DecodeParams::greedy(
                            ctx.parallel.entries()[0].max_tokens(),
                            ctx.parallel.entries()[0].seed(),
                        );
                        match teacher.generate(prompt, &params, 0) {
                            Ok(generated) => {
                                partition
                                    .metrics
                                    .record_call(generated.token_count(), generated.latency_ms());
                                split_chain(generated.text(), ctx.extractor)
                            }
                            Err(e) => {
                                partition.metrics.record_failed_call();
                                partition.failures.push(PartitionFailure {
                                    prompt_id: prompt.id().to_string(),
                                    error: format!("teacher: {e}"),
                                });
                                continue;
                            }
                        }
                    }
                    None => {
                        let source = fallback_chain_source(&successes, ctx.extractor);
                        split_chain(source.text(), ctx.extractor)
                    }
                };
                partition.long.push(LongEntry {
                    prompt: prompt.clone(),
                    chain,
                    answer,
                    report: report.with_route(Route::Long),
                });
            }
        }
    }

    Ok(partition)
}

/// The toy SFT losses over a partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SftLosses {
    /// Sum over short entries of -log P(answer tokens).
    pub short: f64,
    /// Sum over long entries of -log P(chain tokens ++ answer tokens).
    pub long: f64,
    /// short + long, unweighted.
    pub total: f64,
}

/// Evaluates the SFT losses on the toy policy, tokenizing targets over the
/// policy vocabulary and truncating to its maximum length.
pub fn sft_losses(
    policy: &ToyPolicy,
    partition: &SftPartition,
) -> Result<SftLosses, PipelineError> {
    let tokenizer = Tokenizer::new(policy.vocab());
    let mut short = 0.0;
    for entry in &partition.short {
        let tokens = tokenizer.tokenize_truncated(&entry.answer, policy.max_len());
        short -= policy.sequence_log_prob(&tokens).map_err(PipelineError::Policy)?;
    }
    let mut long = 0.0;
    for entry in &partition.long {
        let mut tokens = tokenizer.tokenize(&entry.chain);
        tokens.extend(tokenizer.tokenize(&entry.answer));
        tokens.truncate(policy.max_len());
        long -= policy.sequence_log_prob(&tokens).map_err(PipelineError::Policy)?;
    }
    Ok(SftLosses { short, long, total: short + long })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{default_schedules, Script, ScriptedBackend};
    use crate::backend::DEFAULT_IN_FLIGHT;

    fn schedule() -> DecodeSchedule {
        default_schedules(5, 8, &Default::default()).unwrap().0
    }

    fn ctx<'a>(
        backend: &'a dyn TextBackend,
        router: &'a RouterConfig,
        extractor: &'a ExtractorConfig,
        parallel: &'a DecodeSchedule,
    ) -> PartitionContext<'a> {
        PartitionContext { backend, teacher: None, router, extractor, parallel, in_flight: DEFAULT_IN_FLIGHT }
    }

    #[test]
    fn unanimous_prompt_lands_short() {
        let mut script = Script::new("Answer: 7");
        for slot in 0..5 {
            script.push("p1", slot, "Answer: 7");
        }
        let backend = ScriptedBackend::new(script);
        let router = RouterConfig::default();
        let extractor = ExtractorConfig::default();
        let parallel = schedule();
        let prompts = vec![Prompt::new("p1", "what is 3+4?").unwrap()];

        let partition =
            partition_sft(&prompts, &ctx(&backend, &router, &extractor, &parallel)).unwrap();
        assert_eq!(partition.short.len(), 1);
        assert_eq!(partition.long.len(), 0);
        assert_eq!(partition.short[0].answer, "7");
        assert_eq!(partition.short[0].report.consensus, 1.0);
        assert_eq!(partition.metrics.backend_calls, 5);
    }

    #[test]
    fn divergent_prompt_lands_long_with_cot_chain() {
        let mut script = Script::new("");
        let texts = [
            "1",
            "2",
            "Step 1: compute. Step 2: simplify. Answer: 3",
            "4",
            "5",
        ];
        for (slot, t) in texts.iter().enumerate() {
            script.push("p1", slot, *t);
        }
        let backend = ScriptedBackend::new(script);
        let router = RouterConfig::default();
        let extractor = ExtractorConfig::default();
        let parallel = schedule();
        let prompts = vec![Prompt::new("p1", "hard question").unwrap()];

        let partition =
            partition_sft(&prompts, &ctx(&backend, &router, &extractor, &parallel)).unwrap();
        assert_eq!(partition.short.len(), 0);
        assert_eq!(partition.long.len(), 1);
        let entry = &partition.long[0];
        assert_eq!(entry.answer, "3");
        assert_eq!(entry.chain, "Step 1: compute. Step 2: simplify.");
        assert!((entry.report.consensus - 0.2).abs() < 1e-12);
    }

    #[test]
    fn partition_covers_every_prompt_once() {
        let mut script = Script::new("Answer: same");
        // p2 diverges.
        for (slot, t) in ["a", "b", "c", "d", "e"].iter().enumerate() {
            script.push("p2", slot, *t);
        }
        let backend = ScriptedBackend::new(script);
        let router = RouterConfig::default();
        let extractor = ExtractorConfig::default();
        let parallel = schedule();
        let prompts: Vec<Prompt> =
            (1..=3).map(|i| Prompt::new(format!("p{i}"), "q").unwrap()).collect();

        let partition =
            partition_sft(&prompts, &ctx(&backend, &router, &extractor, &parallel)).unwrap();
        let mut covered: Vec<&str> = partition
            .short
            .iter()
            .map(|e| e.prompt.id())
            .chain(partition.long.iter().map(|e| e.prompt.id()))
            .collect();
        covered.sort_unstable();
        assert_eq!(covered, vec!["p1", "p2", "p3"]);
        assert!(partition.failures.is_empty());
        // Every short entry meets the threshold.
        assert!(partition.short.iter().all(|e| e.report.consensus >= router.tau));
    }

    #[test]
    fn teacher_supplies_the_reference_chain() {
        let mut script = Script::new("");
        for (slot, t) in ["1", "2", "3", "4", "5"].iter().enumerate() {
            script.push("p1", slot, *t);
        }
        let backend = ScriptedBackend::new(script);
        // The teacher answers every prompt with one worked solution.
        let mut teacher_script = Script::new("");
        teacher_script.push("p1", 0, "Step 1: factor.\nStep 2: cancel.\nAnswer: 6");
        let teacher = ScriptedBackend::new(teacher_script);

        let router = RouterConfig::default();
        let extractor = ExtractorConfig::default();
        let parallel = schedule();
        let ctx = PartitionContext {
            backend: &backend,
            teacher: Some(&teacher),
            router: &router,
            extractor: &extractor,
            parallel: &parallel,
            in_flight: DEFAULT_IN_FLIGHT,
        };
        let prompts = vec![Prompt::new("p1", "hard question").unwrap()];
        let partition = partition_sft(&prompts, &ctx).unwrap();

        assert_eq!(partition.long.len(), 1);
        let entry = &partition.long[0];
        assert_eq!(entry.chain, "Step 1: factor.\nStep 2: cancel.");
        assert_eq!(entry.answer, "6");
        // 5 probes + 1 teacher call.
        assert_eq!(partition.metrics.backend_calls, 6);
    }

    #[test]
    fn sft_loss_hand_values() {
        // Uniform policy over 8 tokens: a single length-1 short target costs
        // exactly ln 8.
        let policy = ToyPolicy::new(8, 16);
        let report = ConsensusReport {
            m: 5,
            counts: std::collections::BTreeMap::new(),
            consensus: 1.0,
            majority: "3".into(),
            route: Some(Route::Short),
        };
        let partition = SftPartition {
            short: vec![ShortEntry {
                prompt: Prompt::new("p", "q").unwrap(),
                answer: "3".into(),
                report: report.clone(),
            }],
            long: vec![],
            failures: vec![],
            metrics: RunMetrics::default(),
        };
        let losses = sft_losses(&policy, &partition).unwrap();
        assert!((losses.short - 8.0f64.ln()).abs() < 1e-12);
        assert_eq!(losses.long, 0.0);
        assert_eq!(losses.total, losses.short);
    }
}
