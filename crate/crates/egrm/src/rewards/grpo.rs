//! Group-relative policy optimization, standard and extended.
//!
//! Standard: sample a group of G outputs, z-score their rewards into
//! advantages, and ascend the token-mean clipped surrogate minus a KL
//! penalty toward the reference policy.
//!
//! Extended: consume a pre-identified (preferred, dispreferred) pair. The
//! paired reward (scorer difference plus correctness bonus) sets a shared
//! advantage magnitude `a = min(|R_pair|, 1)`; the preferred sequence gets
//! +a, the dispreferred -a. The objective also carries a scorer-difference
//! term, constant in the policy parameters, that is reported but never
//! differentiated.
//!
//! All gradients are analytic through the categorical log-probabilities:
//! d p(y|ctx) / d logit[ctx, v] = p(y) (1[y = v] - p(v)).

use thiserror::Error;

use crate::consensus::{canonicalize, extract_final_answer, ExtractorConfig};
use crate::rng::SplitMix64;
use crate::scorer::ResponseScorer;
use crate::types::PreferencePair;

use super::policy::{PolicyError, Tokenizer, ToyPolicy};
use super::{paired_reward_value, GrpoConfig};

#[derive(Debug, Error)]
pub enum GrpoError {
    #[error("grpo config: {0}")]
    BadConfig(String),
    #[error("group must contain at least 2 outputs, got {0}")]
    GroupTooSmall(usize),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("objective became non-finite{}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    NonFiniteObjective { step: Option<usize> },
    #[error("preference dataset is empty")]
    EmptyDataset,
    #[error("pair {index}: preferred and dispreferred tokenize identically")]
    DegenerateTokenization { index: usize },
    #[error("pair {index}: response tokenizes to an empty sequence")]
    EmptyTokenization { index: usize },
}

/// Which objective drives training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrpoVariant {
    Standard,
    Extended,
}

impl GrpoVariant {
    pub fn label(&self) -> &'static str {
        match self {
            GrpoVariant::Standard => "standard",
            GrpoVariant::Extended => "extended",
        }
    }
}

/// One sampled output with its scalar reward.
#[derive(Debug, Clone)]
pub struct GroupMember {
    pub tokens: Vec<usize>,
    pub reward: f64,
}

/// What one optimization step reports.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub objective: f64,
    pub kl: f64,
    pub update_norm: f64,
    /// Extended only: the paired reward of the step's pair.
    pub paired_reward: Option<f64>,
    /// Extended only: the advantage magnitude derived from the paired reward.
    pub advantage_scale: Option<f64>,
    /// Extended only: reported preference objective, paired reward minus
    /// `kl_strength` times the KL to the reference policy.
    pub pref_objective: Option<f64>,
}

/// Group z-score advantages: (R - mean) / (std + 1e-8), std with
/// denominator G. Needs at least two rewards.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>, GrpoError> {
    let g = rewards.len();
    if g < 2 {
        return Err(GrpoError::GroupTooSmall(g));
    }
    let mean = rewards.iter().sum::<f64>() / g as f64;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / g as f64;
    let std = var.sqrt();
    Ok(rewards.iter().map(|r| (r - mean) / (std + 1e-8)).collect())
}

/// Token-mean of min(r * A, clip(r, 1-eps, 1+eps) * A) over a sequence's
/// importance ratios. Empty ratio lists contribute zero.
pub fn clipped_surrogate(ratios: &[f64], advantage: f64, eps: f64) -> f64 {
    assert!(eps > 0.0, "eps must be positive");
    if ratios.is_empty() {
        return 0.0;
    }
    let sum: f64 = ratios
        .iter()
        .map(|&r| (r * advantage).min(r.clamp(1.0 - eps, 1.0 + eps) * advantage))
        .sum();
    sum / ratios.len() as f64
}

/// Adds `scale * (1/|o|) sum_t min(r_t A, clip(r_t) A)` to the objective
/// and, when `grad` is given, the matching analytic gradient with respect
/// to the policy logits. The min's tie (unclipped == clipped) takes the
/// unclipped derivative; a strictly binding clip contributes zero.
fn sequence_surrogate(
    policy: &ToyPolicy,
    old: &ToyPolicy,
    tokens: &[usize],
    advantage: f64,
    eps: f64,
    scale: f64,
    mut grad: Option<&mut [f64]>,
) -> Result<f64, GrpoError> {
    if tokens.is_empty() {
        return Ok(0.0);
    }
    let vocab = policy.vocab();
    let inv_len = 1.0 / tokens.len() as f64;
    let mut objective = 0.0;
    let mut prev: Option<usize> = None;
    for &t in tokens {
        let p_new = policy.probs(prev);
        let lp_new = policy.log_probs(prev)[t];
        let lp_old = old.log_probs(prev)[t];
        let ratio = (lp_new - lp_old).exp();

        let unclipped = ratio * advantage;
        let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
        objective += unclipped.min(clipped);

        if let Some(g) = grad.as_deref_mut() {
            if unclipped <= clipped {
                let ctx = match prev {
                    None => 0,
                    Some(p) => 1 + p,
                };
                let row = ctx * vocab;
                let coeff = scale * inv_len * advantage * ratio;
                for v in 0..vocab {
                    let indicator = if v == t { 1.0 } else { 0.0 };
                    g[row + v] += coeff * (indicator - p_new[v]);
                }
            }
        }
        prev = Some(t);
    }
    Ok(scale * inv_len * objective)
}

/// KL(policy || reference) averaged over contexts, with the gradient with
/// respect to the policy logits when requested.
fn kl_with_grad(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    mut grad: Option<(&mut [f64], f64)>,
) -> Result<f64, GrpoError> {
    if policy.vocab() != reference.vocab() {
        return Err(GrpoError::Policy(PolicyError::VocabMismatch(
            policy.vocab(),
            reference.vocab(),
        )));
    }
    let vocab = policy.vocab();
    let contexts = policy.contexts();
    let inv = 1.0 / contexts as f64;
    let mut total = 0.0;
    for ctx in 0..contexts {
        let prev = if ctx == 0 { None } else { Some(ctx - 1) };
        let p = policy.probs(prev);
        let lp = policy.log_probs(prev);
        let lq = reference.log_probs(prev);
        let kl_ctx: f64 = (0..vocab).map(|y| p[y] * (lp[y] - lq[y])).sum();
        total += kl_ctx;
        if let Some((g, scale)) = grad.as_mut().map(|(g, s)| (&mut **g, *s)) {
            let row = ctx * vocab;
            for v in 0..vocab {
                g[row + v] += scale * inv * p[v] * ((lp[v] - lq[v]) - kl_ctx);
            }
        }
    }
    Ok(total * inv)
}

#[allow(clippy::too_many_arguments)]
fn objective_core(
    policy: &ToyPolicy,
    old: &ToyPolicy,
    reference: &ToyPolicy,
    weighted: &[(&[usize], f64)],
    per_sequence_scale: f64,
    constant_term: f64,
    cfg: &GrpoConfig,
    want_grad: bool,
) -> Result<(f64, f64, Option<Vec<f64>>), GrpoError> {
    let mut grad = if want_grad { Some(vec![0.0; policy.logits().len()]) } else { None };
    let mut objective = constant_term;
    for (tokens, advantage) in weighted {
        objective += sequence_surrogate(
            policy,
            old,
            tokens,
            *advantage,
            cfg.clip_eps,
            per_sequence_scale,
            grad.as_deref_mut(),
        )?;
    }
    let kl = kl_with_grad(policy, reference, grad.as_deref_mut().map(|g| (g, -cfg.kl_coef)))?;
    objective -= cfg.kl_coef * kl;
    Ok((objective, kl, grad))
}

/// The grouped objective with explicit advantages: the mean over outputs of
/// the token-mean clipped surrogate, minus `kl_coef` times the KL to the
/// reference.
pub fn grouped_objective(
    policy: &ToyPolicy,
    old: &ToyPolicy,
    reference: &ToyPolicy,
    outputs: &[(&[usize], f64)],
    cfg: &GrpoConfig,
) -> Result<f64, GrpoError> {
    if outputs.is_empty() {
        return Err(GrpoError::GroupTooSmall(0));
    }
    let scale = 1.0 / outputs.len() as f64;
    let (objective, _, _) = objective_core(policy, old, reference, outputs, scale, 0.0, cfg, false)?;
    Ok(objective)
}

/// Standard GRPO objective over a sampled group: advantages are the group
/// z-scores of the members' rewards.
pub fn standard_objective(
    policy: &ToyPolicy,
    old: &ToyPolicy,
    reference: &ToyPolicy,
    group: &[GroupMember],
    cfg: &GrpoConfig,
) -> Result<f64, GrpoError> {
    let (objective, _, _) = standard_core(policy, old, reference, group, cfg, false)?;
    Ok(objective)
}

fn standard_core(
    policy: &ToyPolicy,
    old: &ToyPolicy,
    reference: &ToyPolicy,
    group: &[GroupMember],
    cfg: &GrpoConfig,
    want_grad: bool,
) -> Result<(f64, f64, Option<Vec<f64>>), GrpoError> {
    let rewards: Vec<f64> = group.iter().map(|m| m.reward).collect();
    let advantages = group_advantages(&rewards)?;
    let weighted: Vec<(&[usize], f64)> =
        group.iter().zip(&advantages).map(|(m, &a)| (m.tokens.as_slice(), a)).collect();
    let scale = 1.0 / group.len() as f64;
    objective_core(policy, old, reference, &weighted, scale, 0.0, cfg, want_grad)
}

/// One ascent step on the standard objective. Returns the updated policy
/// and diagnostics; the input policy is untouched. The group's length is G
/// for this step and must be at least 2.
pub fn grpo_step_standard(
    policy: &ToyPolicy,
    old: &ToyPolicy,
    reference: &ToyPolicy,
    group: &[GroupMember],
    cfg: &GrpoConfig,
) -> Result<(ToyPolicy, StepDiagnostics), GrpoError> {
    cfg.validate()?;
    let (objective, kl, grad) = standard_core(policy, old, reference, group, cfg, true)?;
    if !objective.is_finite() {
        return Err(GrpoError::NonFiniteObjective { step: None });
    }
    let grad = grad.expect("gradient requested");
    let mut updated = policy.clone();
    let mut norm_sq = 0.0;
    for (l, g) in updated.logits_mut().iter_mut().zip(&grad) {
        let delta = cfg.learning_rate * g;
        *l += delta;
        norm_sq += delta * delta;
    }
    Ok((
        updated,
        StepDiagnostics {
            objective,
            kl,
            update_norm: norm_sq.sqrt(),
            paired_reward: None,
            advantage_scale: None,
            pref_objective: None,
        },
    ))
}

/// (objective, kl, paired reward, advantage magnitude, gradient).
type ExtendedParts = (f64, f64, f64, f64, Option<Vec<f64>>);

#[allow(clippy::too_many_arguments)]
fn extended_core(
    policy: &ToyPolicy,
    old: &ToyPolicy,
    reference: &ToyPolicy,
    plus: &[usize],
    minus: &[usize],
    s_plus: f64,
    s_minus: f64,
    plus_correct: bool,
    cfg: &GrpoConfig,
    want_grad: bool,
) -> Result<ExtendedParts, GrpoError> {
    let r_pair = paired_reward_value(s_plus, s_minus, plus_correct, cfg.correctness_weight);
    let advantage = r_pair.abs().min(1.0);
    let weighted: [(&[usize], f64); 2] = [(plus, advantage), (minus, -advantage)];
    // The scorer-difference term does not depend on the policy parameters;
    // it shifts the reported objective only.
    let constant = cfg.scorer_weight * (s_plus - s_minus);
    let (objective, kl, grad) =
        objective_core(policy, old, reference, &weighted, 0.5, constant, cfg, want_grad)?;
    Ok((objective, kl, r_pair, advantage, grad))
}

/// Extended objective for one preference pair: half the summed token-mean
/// surrogates at advantages (+a, -a), plus the scorer-difference term,
/// minus the KL penalty.
#[allow(clippy::too_many_arguments)]
pub fn extended_objective(
    policy: &ToyPolicy,
    old: &ToyPolicy,
    reference: &ToyPolicy,
    plus: &[usize],
    minus: &[usize],
    s_plus: f64,
    s_minus: f64,
    plus_correct: bool,
    cfg: &GrpoConfig,
) -> Result<f64, GrpoError> {
    let (objective, ..) = extended_core(
        policy, old, reference, plus, minus, s_plus, s_minus, plus_correct, cfg, false,
    )?;
    Ok(objective)
}

/// One ascent step on the extended objective.
#[allow(clippy::too_many_arguments)]
pub fn grpo_step_extended(
    policy: &ToyPolicy,
    old: &ToyPolicy,
    reference: &ToyPolicy,
    plus: &[usize],
    minus: &[usize],
    s_plus: f64,
    s_minus: f64,
    plus_correct: bool,
    cfg: &GrpoConfig,
) -> Result<(ToyPolicy, StepDiagnostics), GrpoError> {
    cfg.validate()?;
    if plus == minus {
        return Err(GrpoError::DegenerateTokenization { index: 0 });
    }
    let (objective, kl, r_pair, advantage, grad) = extended_core(
        policy, old, reference, plus, minus, s_plus, s_minus, plus_correct, cfg, true,
    )?;
    if !objective.is_finite() {
        return Err(GrpoError::NonFiniteObjective { step: None });
    }
    let grad = grad.expect("gradient requested");
    let mut updated = policy.clone();
    let mut norm_sq = 0.0;
    for (l, g) in updated.logits_mut().iter_mut().zip(&grad) {
        let delta = cfg.learning_rate * g;
        *l += delta;
        norm_sq += delta * delta;
    }
    Ok((
        updated,
        StepDiagnostics {
            objective,
            kl,
            update_norm: norm_sq.sqrt(),
            paired_reward: Some(r_pair),
            advantage_scale: Some(advantage),
            pref_objective: Some(r_pair - cfg.kl_strength * kl),
        },
    ))
}

/// One point of a training curve; serialized as CSV columns
/// step,variant,objective,mean_preferred_prob,kl.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub step: usize,
    pub objective: f64,
    pub mean_preferred_prob: f64,
    pub kl: f64,
}

/// A finished training run.
#[derive(Debug, Clone)]
pub struct GrpoRun {
    pub variant: GrpoVariant,
    pub policy: ToyPolicy,
    pub curve: Vec<CurvePoint>,
}

impl GrpoRun {
    /// First 1-based step whose mean preferred-sequence probability exceeds
    /// the threshold.
    pub fn steps_to_threshold(&self, threshold: f64) -> Option<usize> {
        self.curve.iter().position(|p| p.mean_preferred_prob > threshold).map(|i| i + 1)
    }

    /// Writes the pinned CSV format.
    pub fn write_curve_csv(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "step,variant,objective,mean_preferred_prob,kl")?;
        for p in &self.curve {
            writeln!(
                w,
                "{},{},{:.12e},{:.12e},{:.12e}",
                p.step,
                self.variant.label(),
                p.objective,
                p.mean_preferred_prob,
                p.kl
            )?;
        }
        Ok(())
    }
}

struct TokenizedPair {
    pair_index: usize,
    plus: Vec<usize>,
    minus: Vec<usize>,
    s_plus: f64,
    s_minus: f64,
    plus_correct: bool,
}

fn match_fraction(sample: &[usize], target: &[usize]) -> f64 {
    if target.is_empty() {
        return 0.0;
    }
    let hits = sample.iter().zip(target).filter(|(a, b)| a == b).count();
    hits as f64 / target.len() as f64
}

/// Trains the toy policy on a preference dataset with either variant,
/// starting from `initial` (which also becomes the frozen reference).
///
/// Extended consumes each pair directly. Standard converts the step's pair
/// into a group: G sequences sampled from the current policy, each rewarded
/// by `correctness_weight` times its token agreement with the preferred
/// sequence plus the scorer's value of its rendered text. Deterministic
/// given the config seed.
pub fn train_grpo(
    pairs: &[PreferencePair],
    variant: GrpoVariant,
    scorer: &dyn ResponseScorer,
    initial: ToyPolicy,
    cfg: &GrpoConfig,
) -> Result<GrpoRun, GrpoError> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(GrpoError::EmptyDataset);
    }

    let tokenizer = Tokenizer::new(initial.vocab());
    let extractor = ExtractorConfig::default();
    let max_len = initial.max_len();
    let mut tokenized = Vec::with_capacity(pairs.len());
    for (index, pair) in pairs.iter().enumerate() {
        let plus = tokenizer.tokenize_truncated(pair.preferred(), max_len);
        let minus = tokenizer.tokenize_truncated(pair.dispreferred(), max_len);
        if plus.is_empty() || minus.is_empty() {
            return Err(GrpoError::EmptyTokenization { index });
        }
        if plus == minus {
            return Err(GrpoError::DegenerateTokenization { index });
        }
        let s_plus = scorer.score_response(&pair.prompt, pair.preferred());
        let s_minus = scorer.score_response(&pair.prompt, pair.dispreferred());
        let plus_correct = pair.prompt.ground_truth().is_some_and(|gt| {
            canonicalize(&extract_final_answer(pair.preferred(), &extractor)).canonical
                == canonicalize(gt).canonical
        });
        tokenized.push(TokenizedPair { pair_index: index, plus, minus, s_plus, s_minus, plus_correct });
    }

    let reference = initial.clone();
    let mut policy = initial;
    let mut rng = SplitMix64::new(cfg.seed);
    let mut curve = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let pair = &tokenized[step % tokenized.len()];
        let old = policy.clone();

        let diag = match variant {
            GrpoVariant::Extended => {
                let (updated, diag) = grpo_step_extended(
                    &policy,
                    &old,
                    &reference,
                    &pair.plus,
                    &pair.minus,
                    pair.s_plus,
                    pair.s_minus,
                    pair.plus_correct,
                    cfg,
                )?;
                policy = updated;
                diag
            }
            GrpoVariant::Standard => {
                let prompt = &pairs[pair.pair_index].prompt;
                let group: Vec<GroupMember> = (0..cfg.group_size)
                    .map(|_| {
                        let tokens = policy.sample_sequence(pair.plus.len(), &mut rng);
                        let text = tokenizer.detokenize(&tokens);
                        let reward = cfg.correctness_weight * match_fraction(&tokens, &pair.plus)
                            + scorer.score_response(prompt, &text);
                        GroupMember { tokens, reward }
                    })
                    .collect();
                let (updated, diag) = grpo_step_standard(&policy, &old, &reference, &group, cfg)?;
                policy = updated;
                diag
            }
        };

        if !diag.objective.is_finite() {
            return Err(GrpoError::NonFiniteObjective { step: Some(step) });
        }

        let mean_preferred_prob = tokenized
            .iter()
            .map(|p| policy.sequence_prob(&p.plus).expect("tokens validated"))
            .sum::<f64>()
            / tokenized.len() as f64;
        curve.push(CurvePoint { step, objective: diag.objective, mean_preferred_prob, kl: diag.kl });
    }

    Ok(GrpoRun { variant, policy, curve })
}
