//! Deterministic text features for the discriminative scorer.
//!
//! The layout below is frozen; changing it invalidates every serialized
//! model. All counts are over Unicode scalar values, words are lowercase
//! whitespace-split tokens with non-alphanumeric edges trimmed, and the
//! trigram hash is FNV-1a 64 so the vector is identical on every platform.
//!
//! Index  Feature
//! -----  -----------------------------------------------------------------
//!   0    ln(1 + response length in chars)
//!   1    ln(1 + prompt length in chars)
//!   2    reasoning-marker occurrences in the response
//!          (non-overlapping, lowercased: "step", "therefore", "let's think")
//!   3    numbered-step lines (trimmed line starts with digits then '.' or ')')
//!   4    prompt-response unigram overlap: |words(p) ∩ words(r)| / |words(p)|
//!   5    digit density: digit chars / total chars
//!   6    final-answer flag: response contains "answer:" (case-insensitive)
//!   7    ln(1 + extracted final answer length in chars)
//!  8-15  character-trigram buckets: FNV-1a(trigram) mod 8, each bucket's
//!          count divided by the total trigram count (zeros when < 3 chars)

use crate::consensus::{extract_final_answer, ExtractorConfig};
use crate::rng::fnv1a64;
use crate::types::Prompt;

use super::ScorerError;

/// Dimension of the frozen feature layout.
pub const FEATURE_DIM: usize = 16;

const MARKERS: [&str; 3] = ["step", "therefore", "let's think"];
const TRIGRAM_BUCKETS: usize = 8;

/// Fixed-length feature vector; every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self, ScorerError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ScorerError::NonFiniteFeature);
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn count_occurrences(haystack: &str, needle: &str) -> f64 {
    if needle.is_empty() {
        return 0.0;
    }
    let mut count = 0usize;
    let mut rest = haystack;
    while let Some(pos) = rest.find(needle) {
        count += 1;
        rest = &rest[pos + needle.len()..];
    }
    count as f64
}

fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

fn numbered_step_lines(text: &str) -> f64 {
    text.lines()
        .filter(|line| {
            let t = line.trim_start();
            let digits: String = t.chars().take_while(|c| c.is_ascii_digit()).collect();
            if digits.is_empty() {
                return false;
            }
            matches!(t[digits.len()..].chars().next(), Some('.') | Some(')'))
        })
        .count() as f64
}

/// Extracts the frozen 16-dimensional feature vector for one
/// (prompt, response) pair. Total and deterministic.
pub fn extract_features(prompt: &Prompt, response: &str) -> FeatureVector {
    let mut v = vec![0.0; FEATURE_DIM];

    let response_chars = response.chars().count() as f64;
    let prompt_chars = prompt.text().chars().count() as f64;
    v[0] = (1.0 + response_chars).ln();
    v[1] = (1.0 + prompt_chars).ln();

    let lowered = response.to_lowercase();
    v[2] = MARKERS.iter().map(|m| count_occurrences(&lowered, m)).sum();
    v[3] = numbered_step_lines(response);

    let prompt_words = words(prompt.text());
    if !prompt_words.is_empty() {
        let response_words = words(response);
        let hits = prompt_words.iter().filter(|w| response_words.contains(w)).count();
        v[4] = hits as f64 / prompt_words.len() as f64;
    }

    if response_chars > 0.0 {
        let digits = response.chars().filter(|c| c.is_ascii_digit()).count() as f64;
        v[5] = digits / response_chars;
    }

    let extractor = ExtractorConfig::default();
    v[6] = if lowered.contains("answer:") { 1.0 } else { 0.0 };
    let answer = extract_final_answer(response, &extractor);
    v[7] = (1.0 + answer.chars().count() as f64).ln();

    let chars: Vec<char> = response.chars().collect();
    if chars.len() >= 3 {
        let mut buckets = [0u64; TRIGRAM_BUCKETS];
        let mut total = 0u64;
        for w in chars.windows(3) {
            let tri: String = w.iter().collect();
            buckets[(fnv1a64(tri.as_bytes()) % TRIGRAM_BUCKETS as u64) as usize] += 1;
            total += 1;
        }
        for (i, b) in buckets.iter().enumerate() {
            v[8 + i] = *b as f64 / total as f64;
        }
    }

    FeatureVector::new(v).expect("all features finite by construction")
}
