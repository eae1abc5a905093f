//! Synthetic data recipes for tests, examples, and the acceptance suite.
//!
//! Reference quality scores are inputs to this engine, not something it
//! produces; these generators exist so training and evaluation can run at
//! desk scale with known ground truth.
//!
//! Scored dataset recipe: responses are assembled from controlled
//! ingredients (step lines, reasoning markers, digits, an optional answer
//! line, filler), and the reference quality is
//! `clamp(logistic(QUALITY_WEIGHTS . features + QUALITY_BIAS) + sigma * gauss, 0, 1)`
//! with `sigma = 0.05`, evaluated on the same frozen feature layout the
//! scorer consumes.
//!
//! Preference task recipe: one fixed preferred token sequence and one fixed
//! disjoint dispreferred sequence over the toy vocabulary, repeated across
//! `n` prompts, with a deterministic match-graded scorer.

use crate::backend::Script;
use crate::rng::SplitMix64;
use crate::scorer::{extract_features, ResponseScorer, FEATURE_DIM};
use crate::types::{PreferencePair, Prompt, ScoredSample};
use crate::rewards::Tokenizer;

/// Linear weights of the latent quality function, one per feature.
pub const QUALITY_WEIGHTS: [f64; FEATURE_DIM] = [
    0.45, // response length (log)
    0.0,  // prompt length
    0.35, // reasoning markers
    0.5,  // numbered steps
    1.2,  // unigram overlap
    2.0,  // digit density
    0.8,  // answer flag
    0.3,  // answer length (log)
    0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, // trigram buckets
];

/// Bias of the latent quality function.
pub const QUALITY_BIAS: f64 = -5.0;

/// Noise level of the reference scores.
pub const QUALITY_NOISE_SIGMA: f64 = 0.05;

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// The noise-free latent quality of a (prompt, response) pair.
pub fn latent_quality(prompt: &Prompt, response: &str) -> f64 {
    let f = extract_features(prompt, response);
    let z: f64 =
        f.values().iter().zip(QUALITY_WEIGHTS).map(|(x, w)| x * w).sum::<f64>() + QUALITY_BIAS;
    logistic(z)
}

const TOPICS: [&str; 8] = [
    "compute 17 * 24 and explain",
    "how many primes are below 50",
    "simplify (3x + 6) / 3",
    "what is the area of a 5 by 12 right triangle",
    "convert 2.5 hours to minutes",
    "sum the integers from 1 to 40",
    "is 221 divisible by 13",
    "solve 4y - 7 = 21",
];

const FILLER: [&str; 6] =
    ["let us look at this", "considering the question", "we can note", "rewriting the expression",
     "this reduces the problem", "checking the arithmetic"];

fn build_response(rng: &mut SplitMix64, grade: usize) -> String {
    // `grade` in 0..10 steers the quality ingredients so each prompt's
    // response set spans the quality range; jitter keeps exact ties rare.
    let steps = (grade * 6 / 10).min(6) + rng.below(2);
    let with_answer = grade >= 3 || rng.below(4) == 0;
    let with_marker = grade >= 5;
    let digits = grade >= 2;

    let mut lines = Vec::new();
    if with_marker {
        lines.push("Let's think step by step.".to_string());
    }
    for s in 0..steps {
        let filler = FILLER[rng.below(FILLER.len())];
        if digits {
            lines.push(format!("{}. {} giving {}", s + 1, filler, rng.below(500)));
        } else {
            lines.push(format!("{}. {}", s + 1, filler));
        }
    }
    if lines.is_empty() {
        lines.push(FILLER[rng.below(FILLER.len())].to_string());
    }
    if with_answer {
        lines.push(format!("Answer: {}", rng.below(1000)));
    }
    lines.join("\n")
}

/// Generates `n_prompts * responses_per_prompt` scored samples following the
/// documented recipe. Deterministic in the seed.
pub fn scored_dataset(
    n_prompts: usize,
    responses_per_prompt: usize,
    seed: u64,
) -> Vec<ScoredSample> {
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(n_prompts * responses_per_prompt);
    for p in 0..n_prompts {
        let topic = TOPICS[p % TOPICS.len()];
        let prompt = Prompt::new(format!("syn-{p:04}"), format!("{topic} (variant {p})"))
            .expect("valid prompt");
        for r in 0..responses_per_prompt {
            let grade = r * 10 / responses_per_prompt.max(1);
            let response = build_response(&mut rng, grade);
            let q = (latent_quality(&prompt, &response)
                + QUALITY_NOISE_SIGMA * rng.gaussian())
            .clamp(0.0, 1.0);
            out.push(ScoredSample::new(prompt.clone(), response, q).expect("q clamped"));
        }
    }
    out
}

/// The fixed preferred sequence of the synthetic preference task.
pub const PREFERRED_TOKENS: [usize; 4] = [3, 1, 4, 2];
/// The fixed dispreferred sequence; disjoint from the preferred one.
pub const DISPREFERRED_TOKENS: [usize; 4] = [5, 0, 6, 7];

/// A deterministic scorer for the preference task: grades a response by its
/// token agreement with the preferred sequence, mapped into (0, 1) as
/// `0.2 + 0.6 * match_fraction`.
#[derive(Debug, Clone)]
pub struct MatchScorer {
    target: Vec<usize>,
    tokenizer: Tokenizer,
}

impl MatchScorer {
    pub fn new(target: Vec<usize>, vocab: usize) -> Self {
        Self { target, tokenizer: Tokenizer::new(vocab) }
    }
}

impl ResponseScorer for MatchScorer {
    fn score_response(&self, _prompt: &Prompt, response: &str) -> f64 {
        let tokens = self.tokenizer.tokenize(response);
        let hits = tokens.iter().zip(&self.target).filter(|(a, b)| a == b).count();
        0.2 + 0.6 * hits as f64 / self.target.len().max(1) as f64
    }
}

/// The synthetic two-response preference task: `n_pairs` records sharing
/// one preferred and one dispreferred sequence, each prompt carrying the
/// preferred rendering as ground truth.
pub fn preference_task(n_pairs: usize, vocab: usize) -> (Vec<PreferencePair>, MatchScorer) {
    let tokenizer = Tokenizer::new(vocab);
    let plus_text = tokenizer.detokenize(&PREFERRED_TOKENS);
    let minus_text = tokenizer.detokenize(&DISPREFERRED_TOKENS);
    let pairs = (0..n_pairs)
        .map(|i| {
            let prompt = Prompt::new(format!("pref-{i:04}"), format!("produce the better sequence ({i})"))
                .expect("valid prompt")
                .with_ground_truth(plus_text.clone());
            PreferencePair::new(prompt, plus_text.clone(), minus_text.clone())
                .expect("sequences differ")
        })
        .collect();
    (pairs, MatchScorer::new(PREFERRED_TOKENS.to_vec(), vocab))
}

/// Builds the scripted routing corpus: `n` prompts of which the first
/// `n_unanimous` agree on all `m` probe slots and the rest disagree on
/// every probe; all prompts carry `k` chain-of-thought candidates of graded
/// quality on slots `m..m+k`.
pub fn unanimity_corpus(n: usize, n_unanimous: usize, m: usize, k: usize) -> (Vec<Prompt>, Script) {
    assert!(n_unanimous <= n);
    let mut script = Script::new("Answer: 0");
    let mut prompts = Vec::with_capacity(n);
    for i in 0..n {
        let id = format!("c-{i:04}");
        prompts.push(Prompt::new(&id, format!("corpus question {i}")).expect("valid prompt"));
        if i < n_unanimous {
            for slot in 0..m {
                script.push(&id, slot, format!("Answer: {i}"));
            }
        } else {
            // All probe answers differ; one probe carries reasoning markers
            // so partitioning has a chain source without a teacher.
            for slot in 0..m {
                let answer = i * 100 + slot;
                if slot == 2 {
                    script.push(
                        &id,
                        slot,
                        format!("Let's think step by step.\n1. decompose the quantity\nAnswer: {answer}"),
                    );
                } else {
                    script.push(&id, slot, format!("Answer: {answer}"));
                }
            }
        }
        for c in 0..k {
            let slot = m + c;
            let steps: String = (0..=c)
                .map(|s| format!("{}. refine estimate {}\n", s + 1, (i + s * 7) % 90))
                .collect();
            script.push(&id, slot, format!("Let's think step by step.\n{steps}Answer: {}", i + c));
        }
    }
    (prompts, script)
}
