//! The five-step inference pipeline on a scripted backend.
//!
//! Step 1 probes with M parallel decodes, step 2 routes on consensus, and
//! low-agreement prompts continue through candidate generation (step 3),
//! discriminative scoring (step 4), and argmax selection (step 5).
//!
//! Run: cargo run -p egrm --example scripted_inference

use egrm::backend::{default_schedules, Script, ScriptedBackend};
use egrm::consensus::{ExtractorConfig, RouterConfig};
use egrm::pipeline::{infer, InferContext};
use egrm::scorer::ScorerModel;
use egrm::types::Prompt;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut script = Script::new("Answer: 0");

    // "easy": all five probes agree.
    for slot in 0..5 {
        script.push("easy", slot, "Nothing to ponder. Answer: 8");
    }

    // "hard": probes scatter, then eight candidates of varying quality.
    for (slot, a) in [3, 7, 11, 15, 19].iter().enumerate() {
        script.push("hard", slot, format!("Answer: {a}"));
    }
    for c in 0..8 {
        let steps: String =
            (0..=c).map(|s| format!("{}. narrow the interval to {}\n", s + 1, 20 - s)).collect();
        script.push("hard", 5 + c, format!("Let's think step by step.\n{steps}Answer: 17"));
    }

    let backend = ScriptedBackend::new(script);
    let router = RouterConfig::default();
    let extractor = ExtractorConfig::default();
    let scorer = ScorerModel::seeded(egrm::scorer::FEATURE_DIM, 32, 43);
    let (parallel, candidates) = default_schedules(router.m, 8, &Default::default())?;
    let ctx = InferContext::new(&backend, &router, &extractor, &scorer, &parallel, &candidates)?;

    for id in ["easy", "hard"] {
        let prompt = Prompt::new(id, format!("the {id} question"))?;
        let outcome = infer(&prompt, &ctx, false)?;
        println!("prompt {id:>4}: route {:?}", outcome.route);
        if let Some(report) = &outcome.consensus {
            println!("  consensus {:.2} over {:?}", report.consensus, report.counts);
        }
        for (i, c) in outcome.candidates.iter().enumerate() {
            let marker = if outcome.chosen_index == Some(i) { "->" } else { "  " };
            println!("  {marker} candidate {} (slot {}): score {:.4}", i, c.slot, c.score);
        }
        println!(
            "  answer {:?} after {} backend calls / {} tokens\n",
            outcome.answer, outcome.metrics.backend_calls, outcome.metrics.generated_tokens
        );
    }
    Ok(())
}
