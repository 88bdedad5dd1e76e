//! Prompt assets and their `{{placeholder}}` rendering.

use crate::pool::QA;

pub const CANDIDATE_SYSTEM: &str = include_str!("../../prompts/candidate_system.txt");
pub const CANDIDATE_USER: &str = include_str!("../../prompts/candidate_user.txt");
pub const REPAIR_USER: &str = include_str!("../../prompts/repair_user.txt");
pub const QUESTION_SYSTEM: &str = include_str!("../../prompts/question_system.txt");
pub const QUESTION_USER: &str = include_str!("../../prompts/question_user.txt");
pub const FINAL_USER: &str = include_str!("../../prompts/final_user.txt");
pub const ORACLE_SYSTEM: &str = include_str!("../../prompts/oracle_system.txt");
pub const ORACLE_USER: &str = include_str!("../../prompts/oracle_user.txt");
pub const BASELINE_SYSTEM: &str = include_str!("../../prompts/baseline_system.txt");
pub const BASELINE_QUESTION_USER: &str = include_str!("../../prompts/baseline_question_user.txt");
pub const RANK_USER: &str = include_str!("../../prompts/rank_user.txt");

/// Substitutes every `{{key}}` with its value. Unknown placeholders are left
/// in place.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        match after.find("}}") {
            Some(end) => {
                let key = &after[..end];
                match vars.iter().find(|(k, _)| *k == key) {
                    Some((_, v)) => out.push_str(v),
                    None => {
                        out.push_str("{{");
                        out.push_str(key);
                        out.push_str("}}");
                    }
                }
                rest = &after[end + 2..];
            }
            None => {
                out.push_str(&rest[start..]);
                rest = "";
            }
        }
    }
    out.push_str(rest);
    out
}

/// Renders the Q&A history as numbered `Qi:` / `Ai:` lines.
pub fn render_history(history: &[QA]) -> String {
    if history.is_empty() {
        return "(none yet)".to_string();
    }
    history
        .iter()
        .enumerate()
        .map(|(i, qa)| format!("Q{n}: {}\nA{n}: {}", qa.question_text.trim(), qa.answer, n = i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn render_numbered(items: &[String]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, q)| format!("{}. {}", i + 1, q))
        .collect::<Vec<_>>()
        .join("\n")
}
