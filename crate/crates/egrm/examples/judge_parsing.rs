//! Rendering the judge prompt and parsing tagged judge output.
//!
//! Run: cargo run -p egrm --example judge_parsing

use egrm::pipeline::{parse_judgment, render_judge_prompt};
use egrm::types::Prompt;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let prompt = Prompt::new("p1", "How many liters in 3.5 cubic decimeters?")?;
    let rendered = render_judge_prompt(&prompt, "3.5 cubic decimeters is 3.5 liters. Answer: 3.5");
    println!("--- rendered judge prompt (first 12 lines) ---");
    for line in rendered.lines().take(12) {
        println!("{line}");
    }
    println!("...\n");

    let outputs = [
        "Accuracy holds up.\nFinal Score: <Predict> 8 </Predict>\nFinal verdict: <judgment>[Yes]</judgment>",
        "<Predict>11</Predict> <judgment>[No]</judgment>",
        "no structured tags whatsoever",
        "<Predict> I would say 6 out of 10 </Predict> and <judgment>leaning yes</judgment>",
    ];
    for text in outputs {
        let parsed = parse_judgment(text);
        println!("{text:?}\n  -> score {:?}, verdict {:?}\n", parsed.score, parsed.verdict);
    }
    Ok(())
}
