//! Batch experiments: load tasks, run a method over them, score, aggregate.

mod aggregate;
mod output;
mod run;

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::spec::{normalize_labels, spec_from_value, Spec};

pub use aggregate::{aggregate, pearson, GroupSummary, RegenBucket, RoundStats, Summary};
pub use output::{render_table, write_outputs, FAILURES_JSONL, REGEN_CSV, RESULTS_JSONL, ROUNDS_CSV, SUMMARY_JSON};
pub use run::{
    run_experiment, run_task, ExperimentConfig, ExperimentOutput, GatewayFactory, Method, OracleKind,
    RunResult, TaskFailure,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid task file at line {line}: {reason}")]
    InvalidTaskFile { line: usize, reason: String },
    #[error("no results to aggregate")]
    EmptyResults,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub ambiguous_prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_prompt: Option<String>,
    pub reference_spec: Spec,
}

/// Parses JSONL task text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_tasks(text: &str) -> Result<Vec<Task>, HarnessError> {
    let mut tasks = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let invalid = |reason: String| HarnessError::InvalidTaskFile { line: i + 1, reason };
        let mut value: Value = serde_json::from_str(line).map_err(|e| invalid(e.to_string()))?;
        let obj = value.as_object_mut().ok_or_else(|| invalid("task is not a JSON object".into()))?;
        let reference = obj.remove("reference_spec").ok_or_else(|| invalid("missing reference_spec".into()))?;
        let text_field = |key: &str| -> Result<Option<String>, HarnessError> {
            match obj.get(key) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(_) => Err(invalid(format!("{key} must be a string"))),
            }
        };
        let id = text_field("id")?.ok_or_else(|| invalid("missing id".into()))?;
        let ambiguous_prompt = text_field("ambiguous_prompt")?.ok_or_else(|| invalid("missing ambiguous_prompt".into()))?;
        let original_prompt = text_field("original_prompt")?;
        let spec = spec_from_value(reference).map_err(|e| invalid(format!("reference_spec: {e}")))?;
        tasks.push(Task { id, ambiguous_prompt, original_prompt, reference_spec: normalize_labels(&spec) });
    }
    Ok(tasks)
}

pub fn load_tasks(path: &Path) -> Result<Vec<Task>, HarnessError> {
    parse_tasks(&std::fs::read_to_string(path)?)
}

/// One JSON object per line, in the format [`parse_tasks`] reads.
pub fn tasks_to_jsonl(tasks: &[Task]) -> String {
    tasks
        .iter()
        .map(|t| serde_json::to_string(t).expect("task serializes") + "\n")
        .collect()
}
