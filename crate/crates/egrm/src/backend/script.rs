//! Deterministic scripted backend for tests, examples, and offline runs.
//!
//! A script maps (prompt id, slot index) to a canned completion; anything
//! unscripted falls back to a default text, so lookups are total. Scripted
//! generations report zero latency, which keeps whole runs byte-identical
//! across repeats and concurrency levels.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::types::{DecodeParams, GenerationResult, Prompt};

use super::{BackendError, TextBackend};

fn word_count(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScriptEntry {
    prompt_id: String,
    slot: usize,
    text: String,
    #[serde(default)]
    tokens: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScriptFile {
    #[serde(default)]
    default: String,
    #[serde(default)]
    entries: Vec<ScriptEntry>,
}

/// Canned completions addressed by (prompt id, slot index).
#[derive(Debug, Clone, Default)]
pub struct Script {
    default_text: String,
    entries: HashMap<(String, usize), (String, u64)>,
}

impl Script {
    pub fn new(default_text: impl Into<String>) -> Self {
        Self { default_text: default_text.into(), entries: HashMap::new() }
    }

    /// Adds one scripted completion. Token count defaults to the whitespace
    /// word count when not given explicitly.
    pub fn push(&mut self, prompt_id: impl Into<String>, slot: usize, text: impl Into<String>) -> &mut Self {
        let text = text.into();
        let tokens = word_count(&text);
        self.entries.insert((prompt_id.into(), slot), (text, tokens));
        self
    }

    pub fn push_with_tokens(
        &mut self,
        prompt_id: impl Into<String>,
        slot: usize,
        text: impl Into<String>,
        tokens: u64,
    ) -> Result<&mut Self, BackendError> {
        let prompt_id = prompt_id.into();
        let text = text.into();
        if text.is_empty() != (tokens == 0) {
            return Err(BackendError::Script(format!(
                "entry ({prompt_id}, {slot}): token count {tokens} inconsistent with text length {}",
                text.len()
            )));
        }
        self.entries.insert((prompt_id, slot), (text, tokens));
        Ok(self)
    }

    pub fn from_json(json: &str) -> Result<Self, BackendError> {
        let file: ScriptFile =
            serde_json::from_str(json).map_err(|e| BackendError::Script(format!("parse: {e}")))?;
        let mut script = Script::new(file.default);
        for (i, e) in file.entries.into_iter().enumerate() {
            let tokens = e.tokens.unwrap_or_else(|| word_count(&e.text));
            if e.text.is_empty() != (tokens == 0) {
                return Err(BackendError::Script(format!(
                    "entry {i} ({}, {}): token count {tokens} inconsistent with empty/nonempty text",
                    e.prompt_id, e.slot
                )));
            }
            script.entries.insert((e.prompt_id, e.slot), (e.text, tokens));
        }
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let json = std::fs::read_to_string(path)
            .map_err(|e| BackendError::Script(format!("read {}: {e}", path.display())))?;
        Self::from_json(&json)
    }

    pub fn to_json(&self) -> String {
        let mut entries: Vec<ScriptEntry> = self
            .entries
            .iter()
            .map(|((id, slot), (text, tokens))| ScriptEntry {
                prompt_id: id.clone(),
                slot: *slot,
                text: text.clone(),
                tokens: Some(*tokens),
            })
            .collect();
        entries.sort_by(|a, b| (&a.prompt_id, a.slot).cmp(&(&b.prompt_id, b.slot)));
        let file = ScriptFile { default: self.default_text.clone(), entries };
        serde_json::to_string_pretty(&file).expect("script serializes")
    }

    /// Every slot index must stay below the configured m + k budget.
    pub fn validate_slots(&self, max_slots: usize) -> Result<(), BackendError> {
        for (id, slot) in self.entries.keys() {
            if *slot >= max_slots {
                return Err(BackendError::Script(format!(
                    "entry ({id}, {slot}): slot index outside [0, {max_slots})"
                )));
            }
        }
        Ok(())
    }

    fn lookup(&self, prompt_id: &str, slot: usize) -> (String, u64) {
        match self.entries.get(&(prompt_id.to_string(), slot)) {
            Some((text, tokens)) => (text.clone(), *tokens),
            None => (self.default_text.clone(), word_count(&self.default_text)),
        }
    }
}

/// Backend serving a [`Script`]. Thread-safe: lookups are read-only.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    script: Script,
}

impl ScriptedBackend {
    pub fn new(script: Script) -> Self {
        Self { script }
    }
}

impl TextBackend for ScriptedBackend {
    fn generate(
        &self,
        prompt: &Prompt,
        params: &DecodeParams,
        slot: usize,
    ) -> Result<GenerationResult, BackendError> {
        let (text, tokens) = self.script.lookup(prompt.id(), slot);
        Ok(GenerationResult::new(prompt.id(), params.clone(), text, tokens, 0.0)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prompt() -> Prompt {
        Prompt::new("p1", "what is 2+2?").unwrap()
    }

    fn params() -> DecodeParams {
        DecodeParams::new(0.7, 0.95, 16, 43).unwrap()
    }

    #[test]
    fn scripted_lookup_and_fallback() {
        let mut script = Script::new("fallback");
        script.push("p1", 0, "Answer: 4");
        let backend = ScriptedBackend::new(script);

        let hit = backend.generate(&prompt(), &params(), 0).unwrap();
        assert_eq!(hit.text(), "Answer: 4");
        assert_eq!(hit.token_count(), 2);
        assert_eq!(hit.latency_ms(), 0.0);

        let miss = backend.generate(&prompt(), &params(), 3).unwrap();
        assert_eq!(miss.text(), "fallback");
    }

    #[test]
    fn json_round_trip() {
        let json = r#"{
            "default": "dunno",
            "entries": [
                {"prompt_id": "p1", "slot": 0, "text": "Answer: 4", "tokens": 12},
                {"prompt_id": "p1", "slot": 1, "text": "it is 4"}
            ]
        }"#;
        let script = Script::from_json(json).unwrap();
        assert_eq!(script.lookup("p1", 0), ("Answer: 4".to_string(), 12));
        assert_eq!(script.lookup("p1", 1), ("it is 4".to_string(), 3));
        assert_eq!(script.lookup("p2", 0), ("dunno".to_string(), 1));

        let reparsed = Script::from_json(&script.to_json()).unwrap();
        assert_eq!(reparsed.lookup("p1", 0), script.lookup("p1", 0));
    }

    #[test]
    fn inconsistent_tokens_rejected() {
        let json = r#"{"default": "", "entries": [{"prompt_id": "p", "slot": 0, "text": "hi", "tokens": 0}]}"#;
        assert!(Script::from_json(json).is_err());
    }

    #[test]
    fn slot_budget_enforced() {
        let mut script = Script::new("");
        script.push("p1", 13, "too far");
        assert!(script.validate_slots(13).is_err());
        assert!(script.validate_slots(14).is_ok());
    }
}
