//! The hybrid regression-ranking objective and its analytic gradient.
//!
//! Loss = alpha * mean Huber(q, q_hat) over samples
//!      + (1 - alpha) * mean hinge over mined pairs,
//! where pairs (i, j) are mined within a prompt's response set whenever
//! q_i > q_j + margin. With no minable pairs the hinge term is zero and the
//! breakdown says so.
//!
//! Kink conventions, chosen so the analytic gradient is deterministic and
//! matches central finite differences away from the kinks: the Huber
//! boundary |error| = delta belongs to the quadratic branch, and the hinge
//! kink at a predicted gap of exactly `margin` belongs to the inactive
//! branch.

use serde::Deserialize;

use crate::types::ScoredSample;

use super::{extract_features, FeatureVector, ScorerError, ScorerModel};

/// Mixing and shape parameters. Defaults: delta 0.1, margin 0.2, alpha 0.7.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HybridLossConfig {
    pub delta: f64,
    pub margin: f64,
    pub alpha: f64,
}

impl Default for HybridLossConfig {
    fn default() -> Self {
        Self { delta: 0.1, margin: 0.2, alpha: 0.7 }
    }
}

impl HybridLossConfig {
    pub fn validate(&self) -> Result<(), ScorerError> {
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(ScorerError::BadDelta(self.delta));
        }
        if !self.margin.is_finite() || self.margin < 0.0 {
            return Err(ScorerError::BadMargin(self.margin));
        }
        if !self.alpha.is_finite() || !(0.0..=1.0).contains(&self.alpha) {
            return Err(ScorerError::BadAlpha(self.alpha));
        }
        Ok(())
    }
}

/// Huber loss between a reference quality and a prediction:
/// quadratic inside |q - q_hat| < delta, linear with matched value outside.
pub fn huber(q: f64, q_hat: f64, delta: f64) -> f64 {
    let e = (q - q_hat).abs();
    if e < delta {
        0.5 * e * e
    } else {
        delta * e - 0.5 * delta * delta
    }
}

/// Margin ranking loss for a pair mined with q_i > q_j + margin:
/// zero once the predicted gap reaches the margin.
pub fn hinge(q_hat_i: f64, q_hat_j: f64, margin: f64) -> f64 {
    (margin - (q_hat_i - q_hat_j)).max(0.0)
}

/// All ordered index pairs (i, j) whose reference gap exceeds the margin,
/// in lexicographic order. With `group_by_prompt` (the default used by
/// training) only responses to the same prompt are compared.
pub fn mine_pairs(batch: &[ScoredSample], margin: f64, group_by_prompt: bool) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..batch.len() {
        for j in 0..batch.len() {
            if i == j {
                continue;
            }
            if group_by_prompt && batch[i].prompt.id() != batch[j].prompt.id() {
                continue;
            }
            if batch[i].reference_quality() > batch[j].reference_quality() + margin {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// A batch with features extracted and pairs mined once. Feature extraction
/// does not depend on model parameters, so loss and gradient evaluation over
/// a prepared batch (used by the training loop and by finite-difference
/// checks) is exactly the text-level computation with the redundant work
/// hoisted out.
pub struct PreparedBatch {
    features: Vec<FeatureVector>,
    targets: Vec<f64>,
    pairs: Vec<(usize, usize)>,
}

impl PreparedBatch {
    pub fn new(batch: &[ScoredSample], margin: f64, group_by_prompt: bool) -> Self {
        Self {
            features: batch.iter().map(|s| extract_features(&s.prompt, &s.response)).collect(),
            targets: batch.iter().map(|s| s.reference_quality()).collect(),
            pairs: mine_pairs(batch, margin, group_by_prompt),
        }
    }

    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }
}

/// Loss value with its per-term decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    /// Mean Huber over the batch (unweighted by alpha).
    pub huber_mean: f64,
    /// Mean hinge over mined pairs (unweighted), zero when none were mined.
    pub hinge_mean: f64,
    pub pair_count: usize,
    /// True when no pairs were mined, so the hinge term contributed nothing.
    pub hinge_inactive: bool,
}

pub(crate) fn loss_on_prepared(
    model: &ScorerModel,
    prepared: &PreparedBatch,
    cfg: &HybridLossConfig,
) -> LossBreakdown {
    let scores: Vec<f64> =
        prepared.features.iter().map(|f| model.forward(f.values()).score).collect();

    let n = scores.len().max(1);
    let huber_mean =
        scores.iter().zip(&prepared.targets).map(|(&s, &q)| huber(q, s, cfg.delta)).sum::<f64>()
            / n as f64;

    let pair_count = prepared.pairs.len();
    let hinge_mean = if pair_count == 0 {
        0.0
    } else {
        prepared.pairs.iter().map(|&(i, j)| hinge(scores[i], scores[j], cfg.margin)).sum::<f64>()
            / pair_count as f64
    };

    LossBreakdown {
        total: cfg.alpha * huber_mean + (1.0 - cfg.alpha) * hinge_mean,
        huber_mean,
        hinge_mean,
        pair_count,
        hinge_inactive: pair_count == 0,
    }
}

/// The hybrid loss over a batch of scored samples. Empty batches are not
/// meaningful; the Huber mean of an empty batch is defined as zero.
pub fn hybrid_loss(
    model: &ScorerModel,
    batch: &[ScoredSample],
    cfg: &HybridLossConfig,
) -> Result<LossBreakdown, ScorerError> {
    cfg.validate()?;
    Ok(loss_on_prepared(model, &PreparedBatch::new(batch, cfg.margin, true), cfg))
}

/// [`hybrid_loss`] over an already-prepared batch.
pub fn hybrid_loss_prepared(
    model: &ScorerModel,
    prepared: &PreparedBatch,
    cfg: &HybridLossConfig,
) -> Result<LossBreakdown, ScorerError> {
    cfg.validate()?;
    Ok(loss_on_prepared(model, prepared, cfg))
}

pub(crate) fn gradient_on_prepared(
    model: &ScorerModel,
    prepared: &PreparedBatch,
    cfg: &HybridLossConfig,
) -> Vec<f64> {
    let forwards: Vec<_> = prepared.features.iter().map(|f| model.forward(f.values())).collect();
    let mut grad = vec![0.0; model.params().len()];

    // Regression term. Boundary |e| = delta takes the quadratic derivative.
    let n = forwards.len().max(1);
    let huber_scale = cfg.alpha / n as f64;
    for (i, fwd) in forwards.iter().enumerate() {
        let e = prepared.targets[i] - fwd.score;
        let dl_ds = if e.abs() <= cfg.delta { -e } else { -cfg.delta * e.signum() };
        model.accumulate_score_grad(
            prepared.features[i].values(),
            fwd,
            huber_scale * dl_ds,
            &mut grad,
        );
    }

    // Ranking term. A predicted gap of exactly `margin` is inactive.
    if !prepared.pairs.is_empty() {
        let hinge_scale = (1.0 - cfg.alpha) / prepared.pairs.len() as f64;
        for &(i, j) in &prepared.pairs {
            if forwards[i].score - forwards[j].score < cfg.margin {
                model.accumulate_score_grad(
                    prepared.features[i].values(),
                    &forwards[i],
                    -hinge_scale,
                    &mut grad,
                );
                model.accumulate_score_grad(
                    prepared.features[j].values(),
                    &forwards[j],
                    hinge_scale,
                    &mut grad,
                );
            }
        }
    }

    grad
}

/// Analytic gradient of [`hybrid_loss`] with respect to every model
/// parameter, in the model's flat parameter order.
pub fn gradient(
    model: &ScorerModel,
    batch: &[ScoredSample],
    cfg: &HybridLossConfig,
) -> Result<Vec<f64>, ScorerError> {
    cfg.validate()?;
    Ok(gradient_on_prepared(model, &PreparedBatch::new(batch, cfg.margin, true), cfg))
}

/// [`gradient`] over an already-prepared batch.
pub fn gradient_prepared(
    model: &ScorerModel,
    prepared: &PreparedBatch,
    cfg: &HybridLossConfig,
) -> Result<Vec<f64>, ScorerError> {
    cfg.validate()?;
    Ok(gradient_on_prepared(model, prepared, cfg))
}
