//! Dataset file I/O and validation.
//!
//! All datasets are JSON Lines, one record per line, UTF-8:
//!   prompts        {"id", "text", "ground_truth"?}
//!   scored samples {"id", "response", "q"}
//!   pairs          {"id", "prompt", "chosen", "rejected"}
//!
//! Loading validates every record and reports each violation with its
//! record index instead of stopping at the first problem.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::types::{PreferencePair, Prompt, ScoredSample};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path} line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("invalid dataset: {0} violation(s), first: {1}")]
    Invalid(usize, String),
}

/// One invariant violation, addressed by record index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordError {
    pub index: usize,
    pub message: String,
}

/// Outcome of validating a parsed dataset.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    /// Number of records that passed every check.
    pub ok: usize,
    pub errors: Vec<RecordError>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn into_result(self) -> Result<usize, DatasetError> {
        if let Some(first) = self.errors.first() {
            Err(DatasetError::Invalid(
                self.errors.len(),
                format!("record {}: {}", first.index, first.message),
            ))
        } else {
            Ok(self.ok)
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub ground_truth: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct ScoredRecord {
    pub id: String,
    pub response: String,
    pub q: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PairRecord {
    pub id: String,
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
}

/// Reads one JSONL file into records, reporting the 1-based line number of
/// the first malformed line.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let content = std::fs::read_to_string(path)
        .map_err(|e| DatasetError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|e| DatasetError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Checks prompt records: nonempty unique ids, nonempty text.
pub fn validate_prompts(records: &[PromptRecord]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        let mut bad = false;
        if r.id.is_empty() {
            report.errors.push(RecordError { index: i, message: "empty id".into() });
            bad = true;
        }
        if r.text.is_empty() {
            report.errors.push(RecordError { index: i, message: "empty text".into() });
            bad = true;
        }
        if let Some(&first) = seen.get(r.id.as_str()) {
            report.errors.push(RecordError {
                index: i,
                message: format!("duplicate prompt id `{}` (first at record {first})", r.id),
            });
            bad = true;
        } else {
            seen.insert(&r.id, i);
        }
        if !bad {
            report.ok += 1;
        }
    }
    report
}

/// Checks scored-sample records: nonempty id, quality within [0, 1].
pub fn validate_scored(records: &[ScoredRecord]) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (i, r) in records.iter().enumerate() {
        let mut bad = false;
        if r.id.is_empty() {
            report.errors.push(RecordError { index: i, message: "empty id".into() });
            bad = true;
        }
        if !r.q.is_finite() || !(0.0..=1.0).contains(&r.q) {
            report.errors.push(RecordError { index: i, message: "quality out of range".into() });
            bad = true;
        }
        if !bad {
            report.ok += 1;
        }
    }
    report
}

/// Checks pair records: nonempty id/prompt, chosen differs from rejected.
pub fn validate_pairs(records: &[PairRecord]) -> ValidationReport {
    let mut report = ValidationReport::default();
    for (i, r) in records.iter().enumerate() {
        let mut bad = false;
        if r.id.is_empty() {
            report.errors.push(RecordError { index: i, message: "empty id".into() });
            bad = true;
        }
        if r.prompt.is_empty() {
            report.errors.push(RecordError { index: i, message: "empty prompt".into() });
            bad = true;
        }
        if r.chosen == r.rejected {
            report.errors.push(RecordError { index: i, message: "degenerate pair".into() });
            bad = true;
        }
        if !bad {
            report.ok += 1;
        }
    }
    report
}

/// Loads and validates a prompts file.
pub fn load_prompts(path: &Path) -> Result<Vec<Prompt>, DatasetError> {
    let records: Vec<PromptRecord> = read_jsonl(path)?;
    validate_prompts(&records).into_result()?;
    Ok(records
        .into_iter()
        .map(|r| {
            let p = Prompt::new(r.id, r.text).expect("validated");
            match r.ground_truth {
                Some(gt) => p.with_ground_truth(gt),
                None => p,
            }
        })
        .collect())
}

/// Builds domain samples from already-validated scored records. Prompt text
/// is joined from `prompt_texts` by id; ids without an entry use the id
/// itself as prompt text so the feature layout stays total.
pub fn scored_from_records(
    records: Vec<ScoredRecord>,
    prompt_texts: &HashMap<String, String>,
) -> Vec<ScoredSample> {
    records
        .into_iter()
        .map(|r| {
            let text = prompt_texts.get(&r.id).cloned().unwrap_or_else(|| r.id.clone());
            let prompt = Prompt::new(r.id, text).expect("validated nonempty id");
            ScoredSample::new(prompt, r.response, r.q).expect("validated quality")
        })
        .collect()
}

/// Builds preference pairs from already-validated pair records.
pub fn pairs_from_records(records: Vec<PairRecord>) -> Vec<PreferencePair> {
    records
        .into_iter()
        .map(|r| {
            let prompt = Prompt::new(r.id, r.prompt).expect("validated");
            PreferencePair::new(prompt, r.chosen, r.rejected).expect("validated")
        })
        .collect()
}

/// Loads and validates a scored-sample file (see [`scored_from_records`]).
pub fn load_scored(
    path: &Path,
    prompt_texts: &HashMap<String, String>,
) -> Result<Vec<ScoredSample>, DatasetError> {
    let records: Vec<ScoredRecord> = read_jsonl(path)?;
    validate_scored(&records).into_result()?;
    Ok(scored_from_records(records, prompt_texts))
}

/// Loads and validates a preference-pair file.
pub fn load_pairs(path: &Path) -> Result<Vec<PreferencePair>, DatasetError> {
    let records: Vec<PairRecord> = read_jsonl(path)?;
    validate_pairs(&records).into_result()?;
    Ok(pairs_from_records(records))
}

/// Loads a prompts file into an id -> text map for scored-sample joins.
pub fn prompt_text_map(path: &Path) -> Result<HashMap<String, String>, DatasetError> {
    let prompts = load_prompts(path)?;
    Ok(prompts.into_iter().map(|p| (p.id().to_string(), p.text().to_string())).collect())
}
