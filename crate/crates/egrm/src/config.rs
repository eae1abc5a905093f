//! Engine configuration.
//!
//! One TOML document drives every command. The `[defaults]` table is the
//! single auditable home of the shared hyperparameters (probe count, route
//! threshold, candidate count, loss shape, GRPO coefficients, reward
//! weights, seed); the other tables hold per-subsystem plumbing. Every
//! field has a default, so an empty document is a valid config. Relative
//! paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::backend::{
    default_schedules, BackendDescriptor, BackendKind, DecodeSchedule, HttpBackend,
    ScheduleRanges, Script, ScriptedBackend, TextBackend, DEFAULT_IN_FLIGHT,
};
use crate::consensus::{ExtractorConfig, RouterConfig, RoutingMode};
use crate::rewards::{GrpoConfig, ShortRewardWeights, ToyPolicy};
use crate::scorer::{HybridLossConfig, TrainConfig, DEFAULT_HIDDEN};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("referenced file does not exist: {0}")]
    MissingFile(PathBuf),
}

/// Shared hyperparameters.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    /// Parallel probe decodes per prompt.
    pub m: usize,
    /// Consensus threshold for the short route.
    pub tau: f64,
    /// Chain-of-thought candidates on the long route.
    pub k: usize,
    /// Huber transition point.
    pub delta: f64,
    /// Hinge ranking margin (also the pair-mining gap).
    pub margin: f64,
    /// Huber/hinge mixing weight.
    pub alpha: f64,
    /// Surrogate clip width.
    pub clip_eps: f64,
    /// Sampled group size for standard GRPO.
    pub group_size: usize,
    /// KL penalty inside both GRPO objectives.
    pub kl_coef: f64,
    /// KL coefficient of the reported preference objective.
    pub kl_strength: f64,
    /// Weight of the scorer-difference term in the extended objective.
    pub scorer_weight: f64,
    /// Answer-correctness weight of the paired reward.
    pub correctness_weight: f64,
    /// Short-reward blend: correctness.
    pub w1: f64,
    /// Short-reward blend: brevity headroom.
    pub w2: f64,
    /// Short-reward blend: scorer margin.
    pub w3: f64,
    /// Seed for every deterministic run.
    pub seed: u64,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            m: 5,
            tau: 0.8,
            k: 8,
            delta: 0.1,
            margin: 0.2,
            alpha: 0.7,
            clip_eps: 0.2,
            group_size: 8,
            kl_coef: 0.02,
            kl_strength: 0.02,
            scorer_weight: 1.0,
            correctness_weight: 1.0,
            w1: 0.7,
            w2: 0.2,
            w3: 0.1,
            seed: 43,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouterSection {
    pub mode: RoutingMode,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSection {
    pub kind: BackendKind,
    /// Script file for the scripted backend.
    pub script: Option<PathBuf>,
    /// Base URL of the chat-completions endpoint (http backend).
    pub endpoint: Option<String>,
    pub model_name: Option<String>,
    pub timeout_ms: u64,
    /// One retry per slot when true.
    pub retry_once: bool,
    /// Bound on simultaneously in-flight calls.
    pub in_flight: usize,
}

impl Default for BackendSection {
    fn default() -> Self {
        Self {
            kind: BackendKind::Scripted,
            script: None,
            endpoint: None,
            model_name: None,
            timeout_ms: 30_000,
            retry_once: false,
            in_flight: DEFAULT_IN_FLIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerSection {
    pub hidden: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    /// Serialized model consumed by `infer`.
    pub model: Option<PathBuf>,
}

impl Default for ScorerSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden: DEFAULT_HIDDEN,
            learning_rate: t.learning_rate,
            steps: t.steps,
            batch_size: t.batch_size,
            model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoSection {
    pub learning_rate: f64,
    pub steps: usize,
    pub vocab: usize,
    pub max_len: usize,
}

impl Default for GrpoSection {
    fn default() -> Self {
        let g = GrpoConfig::default();
        Self {
            learning_rate: g.learning_rate,
            steps: g.steps,
            vocab: crate::rewards::DEFAULT_VOCAB,
            max_len: crate::rewards::DEFAULT_MAX_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    /// Optional prompts file joined by id when loading scored samples.
    pub prompts: Option<PathBuf>,
    /// Default output directory for commands that write files.
    pub out_dir: Option<PathBuf>,
}

/// The full engine configuration.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub defaults: Defaults,
    pub router: RouterSection,
    pub extractor: ExtractorConfig,
    pub backend: BackendSection,
    pub schedules: ScheduleRanges,
    pub scorer: ScorerSection,
    pub grpo: GrpoSection,
    pub paths: PathsSection,
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

impl EngineConfig {
    /// Loads and validates a config file. Relative paths inside the file
    /// become absolute against the file's directory; read paths must exist.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        let mut config: EngineConfig = toml::from_str(&text)
            .map_err(|e| ConfigError::Parse { path: path.display().to_string(), message: e.to_string() })?;

        let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        if let Some(script) = &config.backend.script {
            config.backend.script = Some(resolve(&base, script));
        }
        if let Some(model) = &config.scorer.model {
            config.scorer.model = Some(resolve(&base, model));
        }
        if let Some(prompts) = &config.paths.prompts {
            config.paths.prompts = Some(resolve(&base, prompts));
        }
        if let Some(out_dir) = &config.paths.out_dir {
            config.paths.out_dir = Some(resolve(&base, out_dir));
        }

        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.defaults.m < 2 {
            return Err(ConfigError::Invalid(format!("defaults.m must be >= 2, got {}", self.defaults.m)));
        }
        if self.defaults.k == 0 {
            return Err(ConfigError::Invalid("defaults.k must be >= 1".into()));
        }
        if !(self.defaults.tau > 0.0 && self.defaults.tau <= 1.0) {
            return Err(ConfigError::Invalid(format!("defaults.tau must be in (0, 1], got {}", self.defaults.tau)));
        }
        self.loss_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.short_reward_weights().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.grpo_config(None).validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.backend.kind == BackendKind::Http && self.backend.endpoint.is_none() {
            return Err(ConfigError::Invalid("backend.kind = \"http\" requires backend.endpoint".into()));
        }
        if self.grpo.vocab < 2 {
            return Err(ConfigError::Invalid(format!("grpo.vocab must be >= 2, got {}", self.grpo.vocab)));
        }
        if self.grpo.max_len == 0 {
            return Err(ConfigError::Invalid("grpo.max_len must be >= 1".into()));
        }
        for path in [&self.backend.script, &self.scorer.model, &self.paths.prompts]
            .into_iter()
            .flatten()
        {
            if !path.exists() {
                return Err(ConfigError::MissingFile(path.clone()));
            }
        }
        Ok(())
    }

    pub fn router_config(&self) -> Result<RouterConfig, ConfigError> {
        RouterConfig::new(self.defaults.m, self.defaults.tau, self.router.mode)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn schedules(&self) -> Result<(DecodeSchedule, DecodeSchedule), ConfigError> {
        default_schedules(self.defaults.m, self.defaults.k, &self.schedules)
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn build_backend(&self) -> Result<Box<dyn TextBackend>, ConfigError> {
        match self.backend.kind {
            BackendKind::Scripted => {
                let script = match &self.backend.script {
                    Some(path) => Script::load(path).map_err(|e| ConfigError::Invalid(e.to_string()))?,
                    None => Script::new(""),
                };
                script
                    .validate_slots(self.defaults.m + self.defaults.k)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                Ok(Box::new(ScriptedBackend::new(script)))
            }
            BackendKind::Http => {
                let descriptor = BackendDescriptor {
                    kind: BackendKind::Http,
                    endpoint: self.backend.endpoint.clone(),
                    model_name: self.backend.model_name.clone(),
                    timeout_ms: self.backend.timeout_ms,
                };
                let backend = HttpBackend::new(&descriptor, self.backend.retry_once)
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                Ok(Box::new(backend))
            }
        }
    }

    pub fn loss_config(&self) -> HybridLossConfig {
        HybridLossConfig {
            delta: self.defaults.delta,
            margin: self.defaults.margin,
            alpha: self.defaults.alpha,
        }
    }

    pub fn train_config(&self, seed_override: Option<u64>) -> TrainConfig {
        TrainConfig {
            learning_rate: self.scorer.learning_rate,
            steps: self.scorer.steps,
            batch_size: self.scorer.batch_size,
            seed: seed_override.unwrap_or(self.defaults.seed),
        }
    }

    pub fn grpo_config(&self, seed_override: Option<u64>) -> GrpoConfig {
        GrpoConfig {
            group_size: self.defaults.group_size,
            clip_eps: self.defaults.clip_eps,
            kl_coef: self.defaults.kl_coef,
            scorer_weight: self.defaults.scorer_weight,
            kl_strength: self.defaults.kl_strength,
            correctness_weight: self.defaults.correctness_weight,
            learning_rate: self.grpo.learning_rate,
            steps: self.grpo.steps,
            seed: seed_override.unwrap_or(self.defaults.seed),
        }
    }

    pub fn short_reward_weights(&self) -> ShortRewardWeights {
        ShortRewardWeights { w1: self.defaults.w1, w2: self.defaults.w2, w3: self.defaults.w3 }
    }

    pub fn policy_template(&self) -> ToyPolicy {
        ToyPolicy::new(self.grpo.vocab, self.grpo.max_len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_a_valid_config() {
        let config: EngineConfig = toml::from_str("").unwrap();
        assert_eq!(config.defaults.m, 5);
        assert_eq!(config.defaults.tau, 0.8);
        assert_eq!(config.defaults.k, 8);
        assert_eq!(config.defaults.seed, 43);
        config.validate().unwrap();
        let router = config.router_config().unwrap();
        assert_eq!(router.m, 5);
        let (par, cand) = config.schedules().unwrap();
        assert_eq!(par.len(), 5);
        assert_eq!(cand.len(), 8);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(toml::from_str::<EngineConfig>("[defaults]\nnot_a_knob = 1\n").is_err());
    }

    #[test]
    fn shipped_example_config_states_the_defaults() {
        let text = include_str!("../assets/egrm.example.toml");
        let parsed: EngineConfig = toml::from_str(text).unwrap();
        assert_eq!(parsed, EngineConfig::default());
    }

    #[test]
    fn http_backend_requires_endpoint() {
        let config: EngineConfig = toml::from_str("[backend]\nkind = \"http\"\n").unwrap();
        assert!(matches!(config.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn relative_paths_resolve_and_must_exist() {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("egrm.toml");
        std::fs::write(&config_path, "[backend]\nscript = \"script.json\"\n").unwrap();
        assert!(matches!(EngineConfig::load(&config_path), Err(ConfigError::MissingFile(_))));

        std::fs::write(dir.path().join("script.json"), "{\"default\": \"Answer: 1\"}").unwrap();
        let config = EngineConfig::load(&config_path).unwrap();
        assert!(config.backend.script.unwrap().is_absolute());
    }

    #[test]
    fn overrides_flow_into_derived_configs() {
        let toml = r#"
            [defaults]
            m = 3
            tau = 0.75
            k = 4
            seed = 7

            [grpo]
            learning_rate = 0.25
            steps = 100
        "#;
        let config: EngineConfig = toml::from_str(toml).unwrap();
        config.validate().unwrap();
        let grpo = config.grpo_config(None);
        assert_eq!(grpo.seed, 7);
        assert_eq!(grpo.learning_rate, 0.25);
        assert_eq!(grpo.steps, 100);
        assert_eq!(config.grpo_config(Some(99)).seed, 99);
        let (par, cand) = config.schedules().unwrap();
        assert_eq!((par.len(), cand.len()), (3, 4));
    }
}
