//! End-to-end procedures: SFT dataset partitioning, the five-step adaptive
//! inference pipeline, batch execution with cost accounting, and judge
//! output parsing.

mod infer;
mod judgment;
mod partition;

pub use infer::{
    infer, run_batch, BatchFailure, BatchReport, BatchSummary, Candidate, InferContext,
    InferenceOutcome,
};
pub use judgment::{
    parse_judgment, render_judge_prompt, JudgmentParse, Verdict, JUDGE_PROMPT_TEMPLATE,
};
pub use partition::{
    partition_sft, sft_losses, LongEntry, PartitionContext, PartitionFailure, SftLosses,
    SftPartition, ShortEntry,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Configuration(String),
    #[error(transparent)]
    Backend(#[from] crate::backend::BackendError),
    #[error(transparent)]
    Policy(#[from] crate::rewards::PolicyError),
}
