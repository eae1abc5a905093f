//! Discriminative response scoring.
//!
//! A small d -> h -> 1 network maps frozen text features to a quality score
//! squashed into (0, 1) by a logistic. Training uses the hybrid objective
//! ([`hybrid_loss`]): a Huber regression term toward reference quality plus
//! a hinge ranking term over pairs whose reference gap exceeds the margin.

mod features;
mod loss;
mod train;

pub use features::{extract_features, FeatureVector, FEATURE_DIM};
pub use loss::{
    gradient, gradient_prepared, huber, hinge, hybrid_loss, hybrid_loss_prepared, mine_pairs,
    HybridLossConfig, LossBreakdown, PreparedBatch,
};
pub use train::{train, TrainConfig, TrainError, TrainReport};

use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;

use crate::rng::SplitMix64;
use crate::types::Prompt;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScorerError {
    #[error("feature vector has a non-finite entry")]
    NonFiniteFeature,
    #[error("input has dimension {got}, model expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("delta must be > 0, got {0}")]
    BadDelta(f64),
    #[error("margin must be >= 0, got {0}")]
    BadMargin(f64),
    #[error("alpha must be in [0, 1], got {0}")]
    BadAlpha(f64),
    #[error("model file: {0}")]
    BadModelFile(String),
    #[error("text scoring requires input dimension {expected}, model has d={got}")]
    NotTextCompatible { got: usize, expected: usize },
}

/// Default hidden width of the scorer network.
pub const DEFAULT_HIDDEN: usize = 32;

const FORMAT_VERSION: u32 = 1;

/// Anything that can judge a (prompt, response) pair on a (0, 1) scale.
/// Implemented by [`ScorerModel`] and by test doubles.
pub trait ResponseScorer: Sync {
    fn score_response(&self, prompt: &Prompt, response: &str) -> f64;
}

/// The scorer network: input dim `d`, hidden width `h`, parameters stored
/// flat as W1 (row-major h x d), b1 (h), w2 (h), b2 (1).
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerModel {
    d: usize,
    h: usize,
    seed: u64,
    params: Vec<f64>,
}

pub(crate) struct Forward {
    pub hidden: Vec<f64>,
    pub score: f64,
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl ScorerModel {
    pub fn param_count_for(d: usize, h: usize) -> usize {
        d * h + h + h + 1
    }

    /// All-zero parameters; scores 0.5 everywhere.
    pub fn zeros(d: usize, h: usize) -> Self {
        Self { d, h, seed: 0, params: vec![0.0; Self::param_count_for(d, h)] }
    }

    /// Deterministic initialization: every parameter uniform in
    /// [-1/sqrt(d), 1/sqrt(d)] drawn from a SplitMix64 stream.
    pub fn seeded(d: usize, h: usize, seed: u64) -> Self {
        let bound = 1.0 / (d as f64).sqrt();
        let mut rng = SplitMix64::new(seed);
        let params = (0..Self::param_count_for(d, h)).map(|_| rng.uniform(-bound, bound)).collect();
        Self { d, h, seed, params }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn hidden_width(&self) -> usize {
        self.h
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn b1(&self, row: usize) -> f64 {
        self.params[self.d * self.h + row]
    }

    fn w2(&self, row: usize) -> f64 {
        self.params[self.d * self.h + self.h + row]
    }

    fn b2(&self) -> f64 {
        self.params[self.d * self.h + 2 * self.h]
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Forward {
        let mut hidden = Vec::with_capacity(self.h);
        for r in 0..self.h {
            let row = &self.params[r * self.d..(r + 1) * self.d];
            let mut u = self.b1(r);
            for (w, xv) in row.iter().zip(x) {
                u += w * xv;
            }
            hidden.push(u.tanh());
        }
        let mut z = self.b2();
        for (r, a) in hidden.iter().enumerate() {
            z += self.w2(r) * a;
        }
        Forward { score: logistic(z), hidden }
    }

    /// Quality score in (0, 1) for a feature vector of the model's input
    /// dimension.
    pub fn score(&self, features: &FeatureVector) -> Result<f64, ScorerError> {
        if features.len() != self.d {
            return Err(ScorerError::DimensionMismatch { got: features.len(), expected: self.d });
        }
        Ok(self.forward(features.values()).score)
    }

    /// Scores raw text through the frozen feature layout. The model must
    /// have been built with `d == FEATURE_DIM`.
    pub fn score_text(&self, prompt: &Prompt, response: &str) -> Result<f64, ScorerError> {
        if self.d != FEATURE_DIM {
            return Err(ScorerError::NotTextCompatible { got: self.d, expected: FEATURE_DIM });
        }
        self.score(&extract_features(prompt, response))
    }

    /// Adds `upstream * d(score)/d(param)` for every parameter into `grad`.
    pub(crate) fn accumulate_score_grad(
        &self,
        x: &[f64],
        fwd: &Forward,
        upstream: f64,
        grad: &mut [f64],
    ) {
        let s = fwd.score;
        let dz = upstream * s * (1.0 - s);
        let b2_at = self.d * self.h + 2 * self.h;
        grad[b2_at] += dz;
        for r in 0..self.h {
            let a = fwd.hidden[r];
            grad[self.d * self.h + self.h + r] += dz * a;
            let du = dz * self.w2(r) * (1.0 - a * a);
            grad[self.d * self.h + r] += du;
            let row = r * self.d;
            for c in 0..self.d {
                grad[row + c] += du * x[c];
            }
        }
    }

    /// Writes the versioned text format: a header with the shape and init
    /// seed, then one parameter per line at 17 significant digits, which
    /// round-trips every f64 bit-exactly.
    pub fn to_writer(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "egrm-scorer {FORMAT_VERSION}")?;
        writeln!(w, "d {}", self.d)?;
        writeln!(w, "h {}", self.h)?;
        writeln!(w, "seed {}", self.seed)?;
        for p in &self.params {
            writeln!(w, "{p:.16e}")?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut buf = Vec::new();
        self.to_writer(&mut buf)?;
        std::fs::write(path, buf)
    }

    pub fn from_reader(r: impl BufRead) -> Result<Self, ScorerError> {
        let bad = |m: &str| ScorerError::BadModelFile(m.to_string());
        let mut lines = r.lines();
        let mut next = |what: &str| -> Result<String, ScorerError> {
            lines
                .next()
                .ok_or_else(|| bad(&format!("missing {what}")))?
                .map_err(|e| bad(&format!("read: {e}")))
        };

        let magic = next("header")?;
        let mut parts = magic.split_whitespace();
        if parts.next() != Some("egrm-scorer") {
            return Err(bad("not a scorer model file"));
        }
        let version: u32 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("missing format version"))?;
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported format version {version}")));
        }

        let mut field = |name: &str| -> Result<u64, ScorerError> {
            let line = next(name)?;
            let mut it = line.split_whitespace();
            if it.next() != Some(name) {
                return Err(bad(&format!("expected `{name}` line, got `{line}`")));
            }
            it.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad(&format!("bad `{name}` value")))
        };
        let d = field("d")? as usize;
        let h = field("h")? as usize;
        let seed = field("seed")?;

        let expected = Self::param_count_for(d, h);
        let mut params = Vec::with_capacity(expected);
        for line in lines {
            let line = line.map_err(|e| bad(&format!("read: {e}")))?;
            if line.trim().is_empty() {
                continue;
            }
            params.push(line.trim().parse::<f64>().map_err(|e| bad(&format!("bad parameter: {e}")))?);
        }
        if params.len() != expected {
            return Err(bad(&format!("expected {expected} parameters, found {}", params.len())));
        }
        Ok(Self { d, h, seed, params })
    }

    pub fn load(path: &Path) -> Result<Self, ScorerError> {
        let file = std::fs::File::open(path)
            .map_err(|e| ScorerError::BadModelFile(format!("open {}: {e}", path.display())))?;
        Self::from_reader(std::io::BufReader::new(file))
    }
}

impl ResponseScorer for ScorerModel {
    fn score_response(&self, prompt: &Prompt, response: &str) -> f64 {
        self.score_text(prompt, response).expect("text scorer requires d == FEATURE_DIM")
    }
}
