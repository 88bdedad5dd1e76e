//! Canonical yes/no phrasings of structural predicates.
//!
//! These templates are the fallback when the provider cannot phrase a
//! question, and [`parse_template`] inverts them so that a rule-based
//! answerer can evaluate template-shaped questions without a predicate.

use std::sync::LazyLock;

use regex::Regex;

use crate::disagreement::Predicate;

pub fn template_question(predicate: &Predicate) -> String {
    match predicate {
        Predicate::Resource { resource_type } => {
            format!("Should the infrastructure include a {resource_type} resource?")
        }
        Predicate::Topology { source_type, target_type } => {
            format!("Should a {source_type} resource depend on a {target_type} resource?")
        }
        Predicate::Attribute { resource_type, key, value } => {
            format!("Should {resource_type} attribute {key} be {value}?")
        }
    }
}

static RESOURCE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^Should the infrastructure include an? (\S+) resource\?$").unwrap());
static TOPOLOGY_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^Should an? (\S+) resource depend on an? (\S+) resource\?$").unwrap());
static ATTRIBUTE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^Should (\S+) attribute (\S+) be (.*)\?$").unwrap());

/// Recovers the predicate from a question in template form.
pub fn parse_template(question: &str) -> Option<Predicate> {
    let q = question.trim();
    if let Some(c) = RESOURCE_RE.captures(q) {
        return Some(Predicate::Resource { resource_type: c[1].to_string() });
    }
    if let Some(c) = TOPOLOGY_RE.captures(q) {
        return Some(Predicate::Topology { source_type: c[1].to_string(), target_type: c[2].to_string() });
    }
    ATTRIBUTE_RE.captures(q).map(|c| Predicate::Attribute {
        resource_type: c[1].to_string(),
        key: c[2].to_string(),
        value: c[3].to_string(),
    })
}
