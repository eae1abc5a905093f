//! Deterministic scorer training: plain gradient descent at a fixed rate.

use serde::Deserialize;
use thiserror::Error;

use crate::rng::SplitMix64;
use crate::types::ScoredSample;

use super::loss::{gradient_on_prepared, loss_on_prepared, PreparedBatch};
use super::{HybridLossConfig, ScorerError, ScorerModel, DEFAULT_HIDDEN, FEATURE_DIM};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("loss became non-finite at step {step}")]
    Diverged { step: usize },
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error("training config: {0}")]
    BadConfig(String),
}

/// Optimization settings. Desk-scale defaults: learning rate 1e-2,
/// 400 steps of batch 32, seed 43.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-2, steps: 400, batch_size: 32, seed: 43 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(TrainError::BadConfig(format!("learning_rate {}", self.learning_rate)));
        }
        if self.steps == 0 {
            return Err(TrainError::BadConfig("steps must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::BadConfig("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// A trained model plus the per-step loss trace.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: ScorerModel,
    /// Batch loss evaluated before each step's update.
    pub loss_history: Vec<f64>,
}

/// Trains a fresh scorer on the dataset. Fully deterministic given
/// (dataset, configs): parameters initialize uniform in [-1/sqrt(d),
/// 1/sqrt(d)] from the seed, sample order is a single seeded shuffle, and
/// steps walk that order in fixed-size batches, cycling as needed.
pub fn train(
    dataset: &[ScoredSample],
    loss_cfg: &HybridLossConfig,
    train_cfg: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    loss_cfg.validate()?;
    train_cfg.validate()?;

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = SplitMix64::new(train_cfg.seed);
    rng.shuffle(&mut order);

    let mut model = ScorerModel::seeded(FEATURE_DIM, DEFAULT_HIDDEN, train_cfg.seed);
    let mut history = Vec::with_capacity(train_cfg.steps);
    let mut cursor = 0usize;

    for step in 0..train_cfg.steps {
        let mut batch = Vec::with_capacity(train_cfg.batch_size);
        for _ in 0..train_cfg.batch_size.min(dataset.len()) {
            batch.push(dataset[order[cursor]].clone());
            cursor = (cursor + 1) % order.len();
        }
        let prepared = PreparedBatch::new(&batch, loss_cfg.margin, true);

        let loss = loss_on_prepared(&model, &prepared, loss_cfg);
        if !loss.total.is_finite() {
            return Err(TrainError::Diverged { step });
        }
        history.push(loss.total);

        let grad = gradient_on_prepared(&model, &prepared, loss_cfg);
        for (p, g) in model.params_mut().iter_mut().zip(&grad) {
            *p -= train_cfg.learning_rate * g;
        }
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(TrainError::Diverged { step });
        }
    }

    Ok(TrainReport { model, loss_history: history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Prompt;

    fn tiny_dataset() -> Vec<ScoredSample> {
        let mut out = Vec::new();
        for (i, (r, q)) in [("Answer: 4", 0.9), ("therefore 5", 0.55), ("nah", 0.15)]
            .iter()
            .enumerate()
        {
            let p = Prompt::new(format!("p{}", i / 3), "what is 2+2?").unwrap();
            out.push(ScoredSample::new(p, *r, *q).unwrap());
        }
        out
    }

    #[test]
    fn same_seed_gives_identical_history() {
        let data = tiny_dataset();
        let cfg = TrainConfig { steps: 20, batch_size: 3, ..Default::default() };
        let a = train(&data, &HybridLossConfig::default(), &cfg).unwrap();
        let b = train(&data, &HybridLossConfig::default(), &cfg).unwrap();
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn empty_dataset_is_an_error() {
        assert!(matches!(
            train(&[], &HybridLossConfig::default(), &TrainConfig::default()),
            Err(TrainError::EmptyDataset)
        ));
    }

    #[test]
    fn loss_decreases_on_tiny_problem() {
        let data = tiny_dataset();
        let cfg = TrainConfig { steps: 200, batch_size: 3, ..Default::default() };
        let report = train(&data, &HybridLossConfig::default(), &cfg).unwrap();
        assert!(report.loss_history[cfg.steps - 1] < report.loss_history[0]);
    }
}
