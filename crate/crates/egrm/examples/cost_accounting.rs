//! Adaptive routing vs forced chain-of-thought: backend-call accounting.
//!
//! Builds a 100-prompt scripted corpus in which 58 prompts are unanimous
//! across the M = 5 probes and runs the batch pipeline both ways. Adaptive
//! inference spends N*M + |Long|*K calls; the forced baseline spends
//! N*(M+K).
//!
//! Run: cargo run -p egrm --example cost_accounting

use egrm::backend::ScriptedBackend;
use egrm::config::EngineConfig;
use egrm::consensus::RouterConfig;
use egrm::pipeline::{run_batch, InferContext};
use egrm::scorer::ScorerModel;
use egrm::synthetic::unanimity_corpus;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (prompts, script) = unanimity_corpus(100, 58, 5, 8);
    let backend = ScriptedBackend::new(script);
    let router = RouterConfig::default();
    let extractor = Default::default();
    let scorer = ScorerModel::seeded(egrm::scorer::FEATURE_DIM, 32, 43);
    let (parallel, candidates) = EngineConfig::default().schedules()?;
    let ctx = InferContext::new(&backend, &router, &extractor, &scorer, &parallel, &candidates)?;

    let adaptive = run_batch(&prompts, &ctx, false);
    let forced = run_batch(&prompts, &ctx, true);

    println!("prompts: {}", adaptive.summary.n);
    println!("short-route fraction: {:.2}", adaptive.summary.short_fraction);
    println!();
    println!("                calls    tokens");
    println!(
        "adaptive       {:>6}   {:>7}",
        adaptive.summary.calls, adaptive.summary.tokens
    );
    println!(
        "forced CoT     {:>6}   {:>7}",
        forced.summary.calls, forced.summary.tokens
    );
    let call_cut = 1.0 - adaptive.summary.calls as f64 / forced.summary.calls as f64;
    let token_cut = 1.0 - adaptive.summary.tokens as f64 / forced.summary.tokens as f64;
    println!();
    println!("call reduction:  {:.1}%", call_cut * 100.0);
    println!("token reduction: {:.1}%", token_cut * 100.0);
    Ok(())
}
