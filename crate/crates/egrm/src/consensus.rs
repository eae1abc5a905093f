//! Model-internal uncertainty estimation.
//!
//! The routing signal is agreement among parallel decodes: extract a final
//! answer from each generation, normalize it to a canonical key, histogram
//! the keys, and compare the modal frequency against a threshold. High
//! agreement means the prompt is answerable directly (Short route); low
//! agreement flags it for explicit chain-of-thought generation (Long route).
//!
//! An alternative single-probe criterion is also provided: inspect one
//! greedy output for reasoning markers (`contains_cot`) and route Long when
//! they are present.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConsensusError {
    #[error("cannot compute consensus over an empty answer set")]
    EmptyAnswerSet,
    #[error("report covers m={report_m} runs but the router is configured for m={config_m}")]
    RunCountMismatch { report_m: usize, config_m: usize },
    #[error("router requires m >= 2, got {0}")]
    BadRunCount(usize),
    #[error("tau must be in (0, 1], got {0}")]
    BadTau(f64),
}

/// Which way a prompt goes after uncertainty estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Route {
    Short,
    Long,
}

/// How the router decides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoutingMode {
    /// Agreement over M parallel decodes, thresholded at tau.
    #[default]
    Consensus,
    /// Single greedy decode inspected for reasoning markers.
    ContainsCot,
}

/// Router settings. Defaults: M = 5 probes, tau = 0.8, consensus mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouterConfig {
    pub m: usize,
    pub tau: f64,
    pub mode: RoutingMode,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self { m: 5, tau: 0.8, mode: RoutingMode::Consensus }
    }
}

impl RouterConfig {
    pub fn new(m: usize, tau: f64, mode: RoutingMode) -> Result<Self, ConsensusError> {
        if m < 2 {
            return Err(ConsensusError::BadRunCount(m));
        }
        if !tau.is_finite() || tau <= 0.0 || tau > 1.0 {
            return Err(ConsensusError::BadTau(tau));
        }
        Ok(Self { m, tau, mode })
    }
}

/// Answer extraction and reasoning-marker settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractorConfig {
    /// Delimiter introducing the final answer; matched case-insensitively.
    pub answer_delimiter: String,
    /// Substrings whose presence marks a response as chain-of-thought.
    pub cot_markers: Vec<String>,
    /// Also treat a line starting with "1." as a reasoning marker.
    pub cot_numbered_line: bool,
    /// Length rule when the backend reported a token count.
    pub cot_token_threshold: u64,
    /// Length rule when no token count is available.
    pub cot_char_threshold: usize,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            answer_delimiter: "Answer:".to_string(),
            cot_markers: vec!["step".into(), "therefore".into(), "let's think".into()],
            cot_numbered_line: true,
            cot_token_threshold: 64,
            cot_char_threshold: 400,
        }
    }
}

/// An extracted answer together with its normalized comparison key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalAnswer {
    pub raw: String,
    pub canonical: String,
}

/// Histogram of canonical answers over `m` parallel runs, the consensus
/// level `max count / m`, and (once routed) the decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusReport {
    pub m: usize,
    pub counts: BTreeMap<String, usize>,
    pub consensus: f64,
    pub majority: String,
    pub route: Option<Route>,
}

impl ConsensusReport {
    pub fn with_route(mut self, route: Route) -> Self {
        self.route = Some(route);
        self
    }
}

/// Byte-offset of the last ASCII-case-insensitive occurrence of `needle`.
fn rfind_ci(haystack: &str, needle: &str) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    haystack
        .as_bytes()
        .windows(needle.len())
        .rposition(|w| w.eq_ignore_ascii_case(needle.as_bytes()))
}

/// Pulls the final answer out of a generation.
///
/// Returns the text after the last occurrence of the configured delimiter
/// (case-insensitive), trimmed. Without a delimiter, falls back to the last
/// nonempty line. Empty input yields the empty answer. Total: never fails.
pub fn extract_final_answer(text: &str, cfg: &ExtractorConfig) -> String {
    if let Some(pos) = rfind_ci(text, &cfg.answer_delimiter) {
        return text[pos + cfg.answer_delimiter.len()..].trim().to_string();
    }
    text.lines()
        .rev()
        .map(str::trim)
        .find(|line| !line.is_empty())
        .unwrap_or("")
        .to_string()
}

/// Re-renders a plain decimal in normal form: no sign for zero, no leading
/// integer zeros, no trailing fractional zeros. Returns None when `s` is not
/// a plain signed decimal.
fn numeric_normal_form(s: &str) -> Option<String> {
    let (negative, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    if digits.is_empty() || digits.chars().any(|c| !c.is_ascii_digit() && c != '.') {
        return None;
    }
    if digits.chars().filter(|&c| c == '.').count() > 1 {
        return None;
    }
    if !digits.chars().any(|c| c.is_ascii_digit()) {
        return None;
    }
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    let int_norm = int_part.trim_start_matches('0');
    let frac_norm = frac_part.trim_end_matches('0');
    let mut out = String::new();
    let int_out = if int_norm.is_empty() { "0" } else { int_norm };
    // "-0" normalizes to "0".
    if negative && !(int_out == "0" && frac_norm.is_empty()) {
        out.push('-');
    }
    out.push_str(int_out);
    if !frac_norm.is_empty() {
        out.push('.');
        out.push_str(frac_norm);
    }
    Some(out)
}

/// Normalizes an extracted answer into a deterministic comparison key:
/// whitespace runs collapse to single spaces, everything lowercases, trailing
/// periods drop, and plain decimals re-render in numeric normal form.
/// Idempotent: canonicalizing a canonical form changes nothing.
pub fn canonicalize(raw: &str) -> CanonicalAnswer {
    let collapsed: String = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    let lowered = collapsed.to_lowercase();
    let stripped = lowered.trim_end_matches('.').trim_end().to_string();
    let canonical = numeric_normal_form(&stripped).unwrap_or(stripped);
    CanonicalAnswer { raw: raw.to_string(), canonical }
}

/// The consensus statistic over one prompt's parallel decodes: histogram the
/// canonical keys and divide the modal count by the number of runs. The
/// majority answer is the argmax, ties broken by lexicographically smallest
/// key. The returned report has no route; see [`route`].
pub fn compute_consensus(answers: &[CanonicalAnswer]) -> Result<ConsensusReport, ConsensusError> {
    if answers.is_empty() {
        return Err(ConsensusError::EmptyAnswerSet);
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for a in answers {
        *counts.entry(a.canonical.clone()).or_insert(0) += 1;
    }
    let max_count = *counts.values().max().expect("nonempty");
    // BTreeMap iterates keys in ascending order, so the first maximizer is
    // the lexicographic tie-break winner.
    let majority = counts
        .iter()
        .find(|(_, &c)| c == max_count)
        .map(|(k, _)| k.clone())
        .expect("nonempty");
    Ok(ConsensusReport {
        m: answers.len(),
        consensus: max_count as f64 / answers.len() as f64,
        counts,
        majority,
        route: None,
    })
}

/// Threshold rule shared by the router and the pipeline: agreement at or
/// above tau is Short, anything below is Long.
pub fn route_by_threshold(consensus: f64, tau: f64) -> Route {
    if consensus >= tau {
        Route::Short
    } else {
        Route::Long
    }
}

/// Routes a consensus report. The report must cover exactly the configured
/// number of runs.
pub fn route(report: &ConsensusReport, config: &RouterConfig) -> Result<Route, ConsensusError> {
    if report.m != config.m {
        return Err(ConsensusError::RunCountMismatch { report_m: report.m, config_m: config.m });
    }
    Ok(route_by_threshold(report.consensus, config.tau))
}

/// Single-probe reasoning check: true when the text carries any configured
/// reasoning marker, starts a numbered list, or exceeds the length rule
/// (token count when available, characters otherwise).
pub fn contains_cot(text: &str, token_count: Option<u64>, cfg: &ExtractorConfig) -> bool {
    let lowered = text.to_lowercase();
    if cfg.cot_markers.iter().any(|m| !m.is_empty() && lowered.contains(&m.to_lowercase())) {
        return true;
    }
    if cfg.cot_numbered_line && text.lines().any(|line| line.trim_start().starts_with("1.")) {
        return true;
    }
    match token_count {
        Some(tokens) => tokens > cfg.cot_token_threshold,
        None => text.chars().count() > cfg.cot_char_threshold,
    }
}
