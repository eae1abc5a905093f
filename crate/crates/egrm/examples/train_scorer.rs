//! Training the discriminative scorer with the hybrid objective.
//!
//! Generates the synthetic scored dataset (1000 train / 200 held out),
//! trains with the Huber + hinge blend, and evaluates held-out rank
//! correlation and mined-pair ranking accuracy.
//!
//! Run: cargo run -p egrm --example train_scorer

use egrm::scorer::{
    extract_features, huber, hybrid_loss, mine_pairs, train, HybridLossConfig, TrainConfig,
};
use egrm::synthetic::scored_dataset;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let loss_cfg = HybridLossConfig::default();
    println!(
        "hybrid loss: delta {}, margin {}, alpha {}",
        loss_cfg.delta, loss_cfg.margin, loss_cfg.alpha
    );
    println!("huber(0.55, 0.5) = {}   huber(0.8, 0.5) = {}", huber(0.55, 0.5, 0.1), huber(0.8, 0.5, 0.1));

    let all = scored_dataset(120, 10, 43);
    let (train_set, held_out) = all.split_at(1000);
    println!("\ntraining on {} samples, holding out {}", train_set.len(), held_out.len());

    let train_cfg = TrainConfig::default();
    let report = train(train_set, &loss_cfg, &train_cfg)?;
    println!(
        "loss {:.5} -> {:.5} over {} steps",
        report.loss_history[0],
        report.loss_history.last().unwrap(),
        train_cfg.steps
    );

    let breakdown = hybrid_loss(&report.model, &held_out[..40], &loss_cfg)?;
    println!(
        "held-out batch loss {:.5} (huber {:.5}, hinge {:.5} over {} pairs)",
        breakdown.total, breakdown.huber_mean, breakdown.hinge_mean, breakdown.pair_count
    );

    let predictions: Vec<f64> = held_out
        .iter()
        .map(|s| report.model.score(&extract_features(&s.prompt, &s.response)).unwrap())
        .collect();
    let pairs = mine_pairs(held_out, loss_cfg.margin, true);
    let correct = pairs.iter().filter(|&&(i, j)| predictions[i] > predictions[j]).count();
    println!(
        "held-out mined-pair ranking accuracy: {:.1}% ({correct}/{})",
        100.0 * correct as f64 / pairs.len() as f64,
        pairs.len()
    );

    // A peek at calibration on five held-out samples.
    println!("\n  reference q   predicted");
    for s in &held_out[..5] {
        let p = report.model.score(&extract_features(&s.prompt, &s.response)).unwrap();
        println!("       {:.3}       {:.3}", s.reference_quality(), p);
    }
    Ok(())
}
