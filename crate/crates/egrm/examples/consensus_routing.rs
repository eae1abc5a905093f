//! Answer extraction, canonicalization, and consensus routing.
//!
//! Run: cargo run -p egrm --example consensus_routing

use egrm::consensus::{
    canonicalize, compute_consensus, contains_cot, extract_final_answer, route, ExtractorConfig,
    RouterConfig,
};

fn main() {
    let extractor = ExtractorConfig::default();
    let router = RouterConfig::default();
    println!("router: M = {}, tau = {}\n", router.m, router.tau);

    // Five parallel decodes of an easy prompt: answers agree in different
    // surface forms.
    let easy = [
        "2 + 2 makes four.\nAnswer: 4",
        "Answer: 4.0",
        "The sum is trivial. Answer:   04",
        "answer: 4",
        "It equals 5. No wait. Answer: 4.00",
    ];
    let answers: Vec<_> = easy
        .iter()
        .map(|text| {
            let raw = extract_final_answer(text, &extractor);
            let canonical = canonicalize(&raw);
            println!("extracted {raw:?} -> canonical {:?}", canonical.canonical);
            canonical
        })
        .collect();
    let report = compute_consensus(&answers).unwrap();
    println!(
        "\neasy prompt: consensus {:.2}, majority {:?}, route {:?}",
        report.consensus,
        report.majority,
        route(&report, &router).unwrap()
    );

    // A hard prompt: the probes scatter.
    let hard = ["Answer: 12", "Answer: 15", "Answer: 12", "Answer: 9", "Answer: 7"];
    let answers: Vec<_> =
        hard.iter().map(|t| canonicalize(&extract_final_answer(t, &extractor))).collect();
    let report = compute_consensus(&answers).unwrap();
    println!(
        "hard prompt: consensus {:.2}, counts {:?}, route {:?}",
        report.consensus,
        report.counts,
        route(&report, &router).unwrap()
    );

    // The single-probe criterion used by the alternative routing mode.
    println!();
    for text in ["42", "Step 1: expand the product. Step 2: collect terms. Answer: 42"] {
        println!("contains_cot({:.24}...) = {}", text, contains_cot(text, None, &extractor));
    }
}
