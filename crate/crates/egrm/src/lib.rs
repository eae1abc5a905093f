//! Consensus-routed generation engine.
//!
//! `egrm` decides per prompt whether chain-of-thought generation is worth
//! paying for. It probes a text backend with M parallel decodes, measures
//! agreement among the extracted answers, and routes: high consensus
//! answers directly, low consensus triggers K diverse chain-of-thought
//! candidates that a lightweight discriminative scorer ranks. The same
//! crate carries the scorer's hybrid Huber + hinge training, paired-reward
//! preference optimization (standard and extended GRPO) on an exactly
//! computable toy policy, the SFT dataset partitioner, and full cost
//! accounting.
//!
//! ## Examples
//!
//! Each major capability has one runnable example:
//!
//! - **`consensus_routing`** - answer extraction, canonical keys, the
//!   consensus statistic, threshold routing
//! - **`scripted_inference`** - the five-step pipeline end to end on a
//!   scripted backend
//! - **`cost_accounting`** - adaptive vs forced chain-of-thought call and
//!   token accounting on a 58%-unanimous corpus
//! - **`train_scorer`** - hybrid-loss training with held-out rank metrics
//! - **`grpo_preferences`** - standard vs extended GRPO on the synthetic
//!   two-response preference task
//! - **`partition_sft`** - consensus-based short/long dataset splitting and
//!   toy SFT losses
//! - **`judge_parsing`** - the judge prompt asset and tagged-output parser
//! - **`http_backend`** - fan-out against an OpenAI-compatible endpoint
//!   (self-contained local stub)
//!
//! ```bash
//! cargo run -p egrm --example scripted_inference
//! cargo run -p egrm --example cost_accounting
//! ```
//!
//! ## Module map
//!
//! - [`types`] - validated domain types shared everywhere
//! - [`consensus`] - extraction, canonicalization, the consensus statistic,
//!   routing
//! - [`backend`] - the [`backend::TextBackend`] trait, scripted and HTTP
//!   providers, bounded concurrent fan-out, decode schedules
//! - [`scorer`] - frozen text features, the bounded scoring network, the
//!   hybrid loss with analytic gradients, deterministic training
//! - [`rewards`] - paired and short-reasoning rewards, the toy policy, both
//!   GRPO objectives
//! - [`pipeline`] - SFT partitioning, five-step inference, batch reports,
//!   judge-output parsing
//! - [`synthetic`] - documented data recipes for tests and examples
//! - [`config`] / [`dataset`] / [`cli`] - the TOML config, JSONL datasets,
//!   and the `egrm` command-line surface
//!
//! Determinism is a design constraint throughout: every random path uses
//! the crate's own seeded generator ([`rng`]), so fixed seeds reproduce
//! runs bit for bit.

pub mod backend;
pub mod cli;
pub mod config;
pub mod consensus;
pub mod dataset;
pub mod pipeline;
pub mod rewards;
pub mod rng;
pub mod scorer;
pub mod synthetic;
pub mod types;
