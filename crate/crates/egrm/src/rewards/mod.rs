//! Preference rewards and group-relative policy optimization on the toy
//! policy.
//!
//! Two reward shapes: the paired reward (scorer difference plus a weighted
//! answer-correctness indicator) and the short-reasoning reward (a fixed
//! blend of correctness, brevity headroom, and clamped scorer margin). Both
//! feed the GRPO variants in [`grpo`]: the standard grouped objective and
//! the extended paired objective.

pub mod grpo;
mod policy;

pub use grpo::{
    clipped_surrogate, extended_objective, group_advantages, grouped_objective,
    grpo_step_extended, grpo_step_standard, standard_objective, train_grpo, CurvePoint,
    GroupMember, GrpoError, GrpoRun, GrpoVariant, StepDiagnostics,
};
pub use policy::{
    exact_kl, token_ratios, PolicyError, Tokenizer, ToyPolicy, DEFAULT_MAX_LEN, DEFAULT_VOCAB,
};

use serde::Deserialize;

use crate::consensus::CanonicalAnswer;

/// Paired preference reward: scorer difference plus `beta` when the
/// preferred response's answer matches the ground truth. A missing ground
/// truth counts as incorrect.
pub fn paired_reward(
    scorer_value_plus: f64,
    scorer_value_minus: f64,
    answer_of_plus: &CanonicalAnswer,
    ground_truth: Option<&CanonicalAnswer>,
    beta: f64,
) -> f64 {
    let correct = ground_truth.is_some_and(|gt| gt.canonical == answer_of_plus.canonical);
    paired_reward_value(scorer_value_plus, scorer_value_minus, correct, beta)
}

/// Same reward with correctness already resolved.
pub fn paired_reward_value(s_plus: f64, s_minus: f64, correct: bool, beta: f64) -> f64 {
    (s_plus - s_minus) + if correct { beta } else { 0.0 }
}

/// Weights of the short-reasoning reward blend. Must be nonnegative and sum
/// to one. Defaults: 0.7 / 0.2 / 0.1.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShortRewardWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for ShortRewardWeights {
    fn default() -> Self {
        Self { w1: 0.7, w2: 0.2, w3: 0.1 }
    }
}

impl ShortRewardWeights {
    pub fn validate(&self) -> Result<(), GrpoError> {
        let ok = self.w1 >= 0.0
            && self.w2 >= 0.0
            && self.w3 >= 0.0
            && (self.w1 + self.w2 + self.w3 - 1.0).abs() < 1e-9;
        if ok {
            Ok(())
        } else {
            Err(GrpoError::BadConfig(format!(
                "short-reward weights must be nonnegative and sum to 1, got ({}, {}, {})",
                self.w1, self.w2, self.w3
            )))
        }
    }
}

/// Coupled reward for short-route responses: correctness, brevity headroom
/// against a token budget, and the scorer margin clamped to [-1, 1].
///
/// Panics if `budget_tokens` is zero; a budget is required for the brevity
/// term.
pub fn short_reasoning_reward(
    correct: bool,
    response_tokens: u64,
    budget_tokens: u64,
    scorer_margin: f64,
    w: &ShortRewardWeights,
) -> f64 {
    assert!(budget_tokens > 0, "budget_tokens must be positive");
    let brevity = (1.0 - response_tokens as f64 / budget_tokens as f64).max(0.0);
    w.w1 * if correct { 1.0 } else { 0.0 } + w.w2 * brevity + w.w3 * scorer_margin.clamp(-1.0, 1.0)
}

/// GRPO settings. The split KL knobs mirror the two places a KL penalty
/// appears: `kl_coef` scales the penalty inside both step objectives, while
/// `kl_strength` scales the KL term of the reported preference objective.
/// `correctness_weight` is the paired reward's answer bonus.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoConfig {
    pub group_size: usize,
    pub clip_eps: f64,
    pub kl_coef: f64,
    pub scorer_weight: f64,
    pub kl_strength: f64,
    pub correctness_weight: f64,
    pub learning_rate: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            clip_eps: 0.2,
            kl_coef: 0.02,
            scorer_weight: 1.0,
            kl_strength: 0.02,
            correctness_weight: 1.0,
            learning_rate: 0.5,
            steps: 500,
            seed: 43,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<(), GrpoError> {
        if self.group_size < 2 {
            return Err(GrpoError::BadConfig(format!("group_size must be >= 2, got {}", self.group_size)));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(GrpoError::BadConfig(format!("clip_eps must be in (0, 1), got {}", self.clip_eps)));
        }
        for (name, v) in [
            ("kl_coef", self.kl_coef),
            ("scorer_weight", self.scorer_weight),
            ("kl_strength", self.kl_strength),
            ("correctness_weight", self.correctness_weight),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(GrpoError::BadConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(GrpoError::BadConfig(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.steps == 0 {
            return Err(GrpoError::BadConfig("steps must be positive".into()));
        }
        Ok(())
    }
}
