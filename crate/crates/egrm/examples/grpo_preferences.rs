//! Standard vs extended GRPO on the synthetic two-response preference task.
//!
//! Both variants optimize the toy policy toward the preferred sequence; the
//! extended objective consumes the (preferred, dispreferred) pair directly
//! through the paired reward, while the standard objective scores sampled
//! groups. The run prints when each variant first pushes the mean preferred
//! probability past 0.8.
//!
//! Run: cargo run -p egrm --example grpo_preferences

use egrm::consensus::canonicalize;
use egrm::rewards::{
    paired_reward, short_reasoning_reward, train_grpo, GrpoConfig, GrpoVariant,
    ShortRewardWeights, ToyPolicy,
};
use egrm::synthetic::preference_task;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // The two reward shapes feeding GRPO.
    let plus = canonicalize("4");
    let truth = canonicalize("4");
    println!(
        "paired reward (S+ 0.9, S- 0.4, correct, beta 1): {}",
        paired_reward(0.9, 0.4, &plus, Some(&truth), 1.0)
    );
    println!(
        "short reward (correct, half budget, margin 1): {}\n",
        short_reasoning_reward(true, 50, 100, 1.0, &ShortRewardWeights::default())
    );

    let (pairs, scorer) = preference_task(200, 8);
    let cfg = GrpoConfig::default();
    println!(
        "task: {} pairs, vocab 8, len 4; G {}, eps {}, lr {}, {} steps, seed {}\n",
        pairs.len(),
        cfg.group_size,
        cfg.clip_eps,
        cfg.learning_rate,
        cfg.steps,
        cfg.seed
    );

    for variant in [GrpoVariant::Standard, GrpoVariant::Extended] {
        let run = train_grpo(&pairs, variant, &scorer, ToyPolicy::default(), &cfg)?;
        let last = run.curve.last().unwrap();
        println!("{:<9} first step with mean pi(r+) > 0.8: {:?}", variant.label(), run.steps_to_threshold(0.8));
        println!(
            "          final mean pi(r+) {:.3}, objective {:.3}, KL to reference {:.3}",
            last.mean_preferred_prob, last.objective, last.kl
        );
        for step in [0, 99, 199, 299, 399, 499] {
            let p = &run.curve[step];
            println!("          step {:>3}: pi(r+) {:.4}", p.step, p.mean_preferred_prob);
        }
        println!();
    }
    Ok(())
}
