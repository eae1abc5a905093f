//! Structured judge-output parsing and the evaluation prompt asset.
//!
//! Judges answer in a tagged format: a 1-10 score inside `<Predict>` tags
//! and a `[Yes]`/`[No]` verdict inside `<judgment>` tags. The parser is
//! total: malformed or missing tags produce absent fields, never errors.

use serde::Serialize;

use crate::types::Prompt;

/// The evaluation prompt template; `{prompt}` and `{response}` are the
/// insertion slots.
pub const JUDGE_PROMPT_TEMPLATE: &str = include_str!("../../assets/judge_prompt.txt");

/// Judge verdict token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Yes,
    No,
}

/// What could be recovered from a judge response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct JudgmentParse {
    /// First integer inside the first well-formed Predict span, kept only
    /// when it lies in 1..=10.
    pub score: Option<u8>,
    /// First yes/no word inside the first well-formed judgment span.
    pub verdict: Option<Verdict>,
}

/// Renders the judge prompt for a (prompt, response) pair.
pub fn render_judge_prompt(prompt: &Prompt, response: &str) -> String {
    JUDGE_PROMPT_TEMPLATE.replace("{prompt}", prompt.text()).replace("{response}", response)
}

/// Byte offset of the first ASCII-case-insensitive occurrence of `needle`
/// at or after `from`. Needles are ASCII, so offsets stay on char
/// boundaries.
fn find_ci(haystack: &str, needle: &str, from: usize) -> Option<usize> {
    let hay = haystack.as_bytes();
    let ned = needle.as_bytes();
    if ned.is_empty() || from >= hay.len() || hay.len() - from < ned.len() {
        return None;
    }
    hay[from..].windows(ned.len()).position(|w| w.eq_ignore_ascii_case(ned)).map(|p| p + from)
}

/// The inner text of the first `<tag>...</tag>` span, case-insensitive.
fn first_tag_span<'a>(text: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = find_ci(text, &open, 0)? + open.len();
    let end = find_ci(text, &close, start)?;
    Some(&text[start..end])
}

/// First maximal ASCII digit run parsed as an integer.
fn first_integer(span: &str) -> Option<u64> {
    let bytes = span.as_bytes();
    let mut i = 0;
    while i < bytes.len() && !bytes[i].is_ascii_digit() {
        i += 1;
    }
    if i == bytes.len() {
        return None;
    }
    let start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    span[start..i].parse().ok()
}

/// First standalone yes/no word (case-insensitive, non-alphabetic
/// boundaries) in the span.
fn first_verdict(span: &str) -> Option<Verdict> {
    let lowered = span.to_lowercase();
    let bytes = lowered.as_bytes();
    let standalone = |pos: usize, len: usize| {
        let before_ok = pos == 0 || !bytes[pos - 1].is_ascii_alphabetic();
        let after_ok = pos + len >= bytes.len() || !bytes[pos + len].is_ascii_alphabetic();
        before_ok && after_ok
    };
    let mut best: Option<(usize, Verdict)> = None;
    for (word, verdict) in [("yes", Verdict::Yes), ("no", Verdict::No)] {
        let mut from = 0;
        while let Some(pos) = lowered[from..].find(word).map(|p| p + from) {
            if standalone(pos, word.len()) {
                if best.is_none_or(|(b, _)| pos < b) {
                    best = Some((pos, verdict));
                }
                break;
            }
            from = pos + 1;
        }
    }
    best.map(|(_, v)| v)
}

/// Parses a judge response. Total over arbitrary UTF-8.
pub fn parse_judgment(text: &str) -> JudgmentParse {
    let score = first_tag_span(text, "Predict")
        .and_then(first_integer)
        .filter(|s| (1..=10).contains(s))
        .map(|s| s as u8);
    let verdict = first_tag_span(text, "judgment").and_then(first_verdict);
    JudgmentParse { score, verdict }
}
