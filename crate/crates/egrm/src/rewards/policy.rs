//! First-order autoregressive categorical policy over a small vocabulary.
//!
//! The conditioning context is just the previous token (or a start symbol),
//! so per-token probabilities, sequence likelihoods, importance ratios, and
//! the KL divergence to another policy are all exactly computable. Defaults
//! are a vocabulary of 8 tokens and sequences up to length 4.

use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;

use crate::rng::{fnv1a64, SplitMix64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("token {token} outside vocabulary of size {vocab}")]
    TokenOutOfVocab { token: usize, vocab: usize },
    #[error("sequence length {len} exceeds policy max_len {max_len}")]
    TooLong { len: usize, max_len: usize },
    #[error("policies differ in vocabulary ({0} vs {1})")]
    VocabMismatch(usize, usize),
    #[error("policy file: {0}")]
    BadPolicyFile(String),
}

const FORMAT_VERSION: u32 = 1;

/// The toy sequence policy. Logits are a (vocab + 1) x vocab table: row 0
/// conditions on the start symbol, row 1 + t conditions on previous token t.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy {
    vocab: usize,
    max_len: usize,
    logits: Vec<f64>,
}

/// Default vocabulary size.
pub const DEFAULT_VOCAB: usize = 8;
/// Default maximum sequence length.
pub const DEFAULT_MAX_LEN: usize = 4;

impl Default for ToyPolicy {
    fn default() -> Self {
        Self::new(DEFAULT_VOCAB, DEFAULT_MAX_LEN)
    }
}

impl ToyPolicy {
    /// Uniform policy: all logits zero.
    pub fn new(vocab: usize, max_len: usize) -> Self {
        assert!(vocab >= 2, "vocabulary needs at least two tokens");
        assert!(max_len >= 1, "max_len must be positive");
        Self { vocab, max_len, logits: vec![0.0; (vocab + 1) * vocab] }
    }

    /// Random logits uniform in [-scale, scale], deterministic in the seed.
    pub fn seeded(vocab: usize, max_len: usize, seed: u64, scale: f64) -> Self {
        let mut policy = Self::new(vocab, max_len);
        let mut rng = SplitMix64::new(seed);
        for l in &mut policy.logits {
            *l = rng.uniform(-scale, scale);
        }
        policy
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn contexts(&self) -> usize {
        self.vocab + 1
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    fn context_index(&self, prev: Option<usize>) -> usize {
        match prev {
            None => 0,
            Some(t) => 1 + t,
        }
    }

    fn row(&self, ctx: usize) -> &[f64] {
        &self.logits[ctx * self.vocab..(ctx + 1) * self.vocab]
    }

    /// Softmax probabilities for one context.
    pub fn probs(&self, prev: Option<usize>) -> Vec<f64> {
        let row = self.row(self.context_index(prev));
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }

    /// Log-softmax for one context.
    pub fn log_probs(&self, prev: Option<usize>) -> Vec<f64> {
        let row = self.row(self.context_index(prev));
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + max;
        row.iter().map(|l| l - log_sum).collect()
    }

    fn check_tokens(&self, tokens: &[usize]) -> Result<(), PolicyError> {
        if tokens.len() > self.max_len {
            return Err(PolicyError::TooLong { len: tokens.len(), max_len: self.max_len });
        }
        for &t in tokens {
            if t >= self.vocab {
                return Err(PolicyError::TokenOutOfVocab { token: t, vocab: self.vocab });
            }
        }
        Ok(())
    }

    /// Sum of per-token conditional log-probabilities; 0 for the empty
    /// sequence.
    pub fn sequence_log_prob(&self, tokens: &[usize]) -> Result<f64, PolicyError> {
        self.check_tokens(tokens)?;
        let mut total = 0.0;
        let mut prev = None;
        for &t in tokens {
            total += self.log_probs(prev)[t];
            prev = Some(t);
        }
        Ok(total)
    }

    pub fn sequence_prob(&self, tokens: &[usize]) -> Result<f64, PolicyError> {
        Ok(self.sequence_log_prob(tokens)?.exp())
    }

    /// Draws a sequence of exactly `len` tokens.
    pub fn sample_sequence(&self, len: usize, rng: &mut SplitMix64) -> Vec<usize> {
        let len = len.min(self.max_len);
        let mut out = Vec::with_capacity(len);
        let mut prev = None;
        for _ in 0..len {
            let probs = self.probs(prev);
            let u = rng.next_f64();
            let mut cum = 0.0;
            let mut chosen = self.vocab - 1;
            for (t, p) in probs.iter().enumerate() {
                cum += p;
                if u < cum {
                    chosen = t;
                    break;
                }
            }
            out.push(chosen);
            prev = Some(chosen);
        }
        out
    }

    /// Versioned text serialization, mirroring the scorer format.
    pub fn to_writer(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "egrm-policy {FORMAT_VERSION}")?;
        writeln!(w, "vocab {}", self.vocab)?;
        writeln!(w, "max_len {}", self.max_len)?;
        for l in &self.logits {
            writeln!(w, "{l:.16e}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut buf = Vec::new();
        self.to_writer(&mut buf)?;
        std::fs::write(path, buf)
    }

    pub fn from_reader(r: impl BufRead) -> Result<Self, PolicyError> {
        let bad = |m: &str| PolicyError::BadPolicyFile(m.to_string());
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String, PolicyError> {
            lines.next().ok_or_else(|| bad(&format!("missing {what}")))?.map_err(|e| bad(&e.to_string()))
        };
        let header = next("header")?;
        if header.split_whitespace().next() != Some("egrm-policy") {
            return Err(bad("not a policy file"));
        }
        let mut field = |name: &str| -> Result<usize, PolicyError> {
            let line = next(name)?;
            let mut it = line.split_whitespace();
            if it.next() != Some(name) {
                return Err(bad(&format!("expected `{name}` line")));
            }
            it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad(&format!("bad `{name}`")))
        };
        let vocab = field("vocab")?;
        let max_len = field("max_len")?;
        let mut logits = Vec::new();
        for line in lines {
            let line = line.map_err(|e| bad(&e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            logits.push(line.trim().parse::<f64>().map_err(|e| bad(&e.to_string()))?);
        }
        if logits.len() != (vocab + 1) * vocab {
            return Err(bad(&format!("expected {} logits, found {}", (vocab + 1) * vocab, logits.len())));
        }
        Ok(Self { vocab, max_len, logits })
    }
}

/// Per-token importance ratios pi_new(t | ctx) / pi_old(t | ctx) along a
/// sequence. Identical policies give all ones.
pub fn token_ratios(
    new_policy: &ToyPolicy,
    old_policy: &ToyPolicy,
    tokens: &[usize],
) -> Result<Vec<f64>, PolicyError> {
    if new_policy.vocab != old_policy.vocab {
        return Err(PolicyError::VocabMismatch(new_policy.vocab, old_policy.vocab));
    }
    new_policy.check_tokens(tokens)?;
    old_policy.check_tokens(tokens)?;
    let mut ratios = Vec::with_capacity(tokens.len());
    let mut prev = None;
    for &t in tokens {
        let lp_new = new_policy.log_probs(prev)[t];
        let lp_old = old_policy.log_probs(prev)[t];
        ratios.push((lp_new - lp_old).exp());
        prev = Some(t);
    }
    Ok(ratios)
}

/// Exact categorical KL(a || b), averaged over all contexts. Closed form:
/// each context contributes sum_y p(y) ln(p(y)/q(y)).
pub fn exact_kl(a: &ToyPolicy, b: &ToyPolicy) -> Result<f64, PolicyError> {
    if a.vocab != b.vocab {
        return Err(PolicyError::VocabMismatch(a.vocab, b.vocab));
    }
    let mut total = 0.0;
    for ctx in 0..a.contexts() {
        let prev = if ctx == 0 { None } else { Some(ctx - 1) };
        let p = a.probs(prev);
        let lp = a.log_probs(prev);
        let lq = b.log_probs(prev);
        for y in 0..a.vocab {
            total += p[y] * (lp[y] - lq[y]);
        }
    }
    Ok(total / a.contexts() as f64)
}

/// Maps text onto the toy vocabulary: whitespace-split words that parse as
/// integers below the vocabulary size become those tokens; anything else
/// hashes into the vocabulary with FNV-1a.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tokenizer {
    vocab: usize,
}

impl Tokenizer {
    pub fn new(vocab: usize) -> Self {
        Self { vocab }
    }

    pub fn tokenize(&self, text: &str) -> Vec<usize> {
        text.split_whitespace()
            .map(|w| match w.parse::<usize>() {
                Ok(t) if t < self.vocab => t,
                _ => (fnv1a64(w.as_bytes()) % self.vocab as u64) as usize,
            })
            .collect()
    }

    pub fn tokenize_truncated(&self, text: &str, max_len: usize) -> Vec<usize> {
        let mut tokens = self.tokenize(text);
        tokens.truncate(max_len);
        tokens
    }

    /// Renders tokens back to the canonical space-joined integer form.
    pub fn detokenize(&self, tokens: &[usize]) -> String {
        tokens.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" ")
    }
}
