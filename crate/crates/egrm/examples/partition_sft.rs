//! Consensus-based SFT dataset partitioning and the toy SFT losses.
//!
//! Probes every prompt M times: agreeing prompts become direct-answer
//! training rows, disagreeing prompts become (chain, answer) rows with the
//! reference chain taken from the most reasoning-like probe response.
//!
//! Run: cargo run -p egrm --example partition_sft

use egrm::backend::{default_schedules, ScriptedBackend};
use egrm::consensus::{ExtractorConfig, RouterConfig};
use egrm::pipeline::{partition_sft, sft_losses, PartitionContext};
use egrm::rewards::ToyPolicy;
use egrm::synthetic::unanimity_corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (prompts, script) = unanimity_corpus(20, 12, 5, 8);
    let backend = ScriptedBackend::new(script);
    let router = RouterConfig::default();
    let extractor = ExtractorConfig::default();
    let (parallel, _) = default_schedules(router.m, 8, &Default::default())?;

    let ctx = PartitionContext {
        backend: &backend,
        teacher: None,
        router: &router,
        extractor: &extractor,
        parallel: &parallel,
        in_flight: 8,
    };
    let partition = partition_sft(&prompts, &ctx)?;

    println!(
        "partitioned {} prompts: {} short, {} long, {} failed ({} backend calls)",
        prompts.len(),
        partition.short.len(),
        partition.long.len(),
        partition.failures.len(),
        partition.metrics.backend_calls
    );
    println!("short fraction: {:.2}\n", partition.short_fraction());

    for entry in partition.short.iter().take(2) {
        println!("short {}: answer {:?} (consensus {:.2})", entry.prompt.id(), entry.answer, entry.report.consensus);
    }
    for entry in partition.long.iter().take(2) {
        println!(
            "long  {}: answer {:?}, chain {:?} (consensus {:.2})",
            entry.prompt.id(),
            entry.answer,
            &entry.chain[..entry.chain.len().min(48)],
            entry.report.consensus
        );
    }

    // Token-level SFT losses on a uniform toy policy.
    let policy = ToyPolicy::new(8, 64);
    let losses = sft_losses(&policy, &partition)?;
    println!(
        "\nSFT losses under a uniform toy policy: short {:.3} + long {:.3} = {:.3}",
        losses.short, losses.long, losses.total
    );
    Ok(())
}
