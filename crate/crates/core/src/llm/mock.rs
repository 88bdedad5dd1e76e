//! Scripted provider keyed by (call kind, per-kind sequence index).
//!
//! Script files are JSONL, one entry per line:
//!
//! ```text
//! {"kind":"candidate_spec","reply":"{\"resources\":{...}}"}
//! {"kind":"phrase_question","index":3,"error":"transient"}
//! ```
//!
//! Entries without an `index` take the next free index for their kind.
//! A call with no scripted entry fails fatally.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{CallKind, ChatProvider, ChatRequest, ProviderError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptedFailure {
    Transient,
    Fatal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub kind: CallKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ScriptedFailure>,
}

impl ScriptEntry {
    pub fn reply(kind: CallKind, text: impl Into<String>) -> Self {
        Self { kind, index: None, reply: Some(text.into()), error: None }
    }

    pub fn transient(kind: CallKind) -> Self {
        Self { kind, index: None, reply: None, error: Some(ScriptedFailure::Transient) }
    }

    pub fn fatal(kind: CallKind) -> Self {
        Self { kind, index: None, reply: None, error: Some(ScriptedFailure::Fatal) }
    }
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("cannot read script: {0}")]
    Io(#[from] std::io::Error),
    #[error("script line {line}: {reason}")]
    Invalid { line: usize, reason: String },
}

type Outcome = Result<String, ScriptedFailure>;

#[derive(Debug, Default)]
pub struct ScriptedProvider {
    script: HashMap<(CallKind, usize), Outcome>,
    counters: Mutex<HashMap<CallKind, usize>>,
}

impl ScriptedProvider {
    pub fn new(entries: impl IntoIterator<Item = ScriptEntry>) -> Self {
        let mut script = HashMap::new();
        let mut next: HashMap<CallKind, usize> = HashMap::new();
        for e in entries {
            let slot = next.entry(e.kind).or_default();
            let index = e.index.unwrap_or(*slot);
            *slot = (*slot).max(index + 1);
            let outcome = match (e.reply, e.error) {
                (_, Some(f)) => Err(f),
                (Some(text), None) => Ok(text),
                (None, None) => Ok(String::new()),
            };
            script.insert((e.kind, index), outcome);
        }
        Self { script, counters: Mutex::new(HashMap::new()) }
    }

    pub fn from_jsonl(text: &str) -> Result<Self, ScriptError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScriptEntry = serde_json::from_str(line)
                .map_err(|e| ScriptError::Invalid { line: i + 1, reason: e.to_string() })?;
            if entry.reply.is_none() && entry.error.is_none() {
                return Err(ScriptError::Invalid { line: i + 1, reason: "entry needs `reply` or `error`".into() });
            }
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }

    pub fn from_file(path: &Path) -> Result<Self, ScriptError> {
        Self::from_jsonl(&std::fs::read_to_string(path)?)
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, kind: CallKind, _request: &ChatRequest) -> Result<String, ProviderError> {
        let index = {
            let mut counters = self.counters.lock().expect("counter lock");
            let c = counters.entry(kind).or_default();
            *c += 1;
            *c - 1
        };
        match self.script.get(&(kind, index)) {
            Some(Ok(text)) => Ok(text.clone()),
            Some(Err(ScriptedFailure::Transient)) => Err(ProviderError::Transient(format!("scripted {kind:?}#{index}"))),
            Some(Err(ScriptedFailure::Fatal)) => Err(ProviderError::Fatal(format!("scripted {kind:?}#{index}"))),
            None => Err(ProviderError::Fatal(format!("script has no entry for {kind:?}#{index}"))),
        }
    }
}
